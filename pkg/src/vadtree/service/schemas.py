"""Request/response models for the HTTP API."""
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, model_validator


class WindowIn(BaseModel):
    start_frame: int = Field(ge=1)
    scores: List[float]


class ConfidenceIn(BaseModel):
    video_id: str
    num_frames: int = Field(ge=1)
    fps: Optional[float] = None
    windows: Optional[List[WindowIn]] = None
    global_scores: Optional[List[float]] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.windows is None) == (self.global_scores is None):
            raise ValueError("exactly one of 'windows' / 'global_scores' is required")
        return self


class TreeParams(BaseModel):
    gamma_min: float = Field(0.4, ge=0.0, le=1.0)
    cluster_method: Literal["kmeans", "kmedoids"] = "kmeans"
    l_raw: Optional[int] = Field(None, ge=2)


class TreeRequest(ConfidenceIn, TreeParams):
    pass


class Peak(BaseModel):
    t: int
    c: float


class PeaksOut(BaseModel):
    video_id: str
    num_frames: int
    peaks: List[Peak]


class NodeOut(BaseModel):
    node_id: str
    l: int
    r: int
    conf_l: float
    conf_r: float
    depth: int


class TreeOut(BaseModel):
    video_id: str
    num_frames: int
    nodes: List[NodeOut]
    coarse: List[str]
    fine: List[str]
    parent_map: Dict[str, List[str]]


class CoverageOut(BaseModel):
    coarse: bool
    fine: bool


class ScoreRecord(BaseModel):
    node_id: str
    cluster: Literal["coarse", "fine"]
    caption: str
    raw_score: float
    refined_score: Optional[float] = None
    fused_score: Optional[float] = None
    error: Optional[str] = None


class ScoreRequest(BaseModel):
    tree: TreeOut
    priors: str = "none"


class RecordsOut(BaseModel):
    video_id: str
    records: List[ScoreRecord]


class RefineRequest(BaseModel):
    video_id: str = ""
    records: List[ScoreRecord]
    embeddings: Dict[str, List[float]] = {}
    k: int = Field(10, ge=0)
    tau: float = Field(0.1, gt=0)


class FuseRequest(BaseModel):
    tree: TreeOut
    records: List[ScoreRecord]
    beta: float = Field(0.4, ge=-1.0, le=1.0)


class FusedOut(BaseModel):
    video_id: str
    num_frames: int
    frame_scores: List[float]
    nodes: List[ScoreRecord]


class FrameScoresIn(BaseModel):
    video_id: str
    num_frames: int
    frame_scores: List[float]


class GroundTruthIn(BaseModel):
    video_id: str
    num_frames: int
    anomalies: List[Tuple[int, int]] = []


class SegmentManifest(BaseModel):
    video_id: str
    segments: List[Tuple[int, int]]


class EvaluateRequest(BaseModel):
    videos: List[FrameScoresIn]
    ground_truth: List[GroundTruthIn]
    segments: Optional[List[SegmentManifest]] = None


class EvalOut(BaseModel):
    auc_roc: float
    ap: float
    num_videos: int
    num_frames: int
    nos: Optional[int] = None
    miou: Optional[float] = None
    mif: Optional[float] = None
    per_video: Dict[str, dict] = {}


class SampleTWRequest(BaseModel):
    num_frames: int = Field(ge=1)
    window_frames: int = Field(ge=1)
    stride_frames: int = Field(ge=1)


class PriorPromptRequest(BaseModel):
    dataset: Optional[str] = None
    events: Optional[List[str]] = None


class CaptionPromptRequest(BaseModel):
    priors: str = "none"


class ScorePromptRequest(BaseModel):
    caption: str


class PromptOut(BaseModel):
    prompt: str


class ParseScoreRequest(BaseModel):
    reply: str


class ParseScoreOut(BaseModel):
    score: float


class PipelineRequest(BaseModel):
    confidences: ConfidenceIn
    params: TreeParams = TreeParams()
    priors: str = "none"
    embeddings: Optional[Dict[str, List[float]]] = None
    synthetic_embeddings: bool = False
    refine_k: int = Field(10, ge=0)
    refine_tau: float = Field(0.1, gt=0)
    beta: float = Field(0.4, ge=-1.0, le=1.0)
