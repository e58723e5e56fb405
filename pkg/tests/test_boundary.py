import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vadtree.boundary import (ConfidenceSequence, LocalWindow, assemble_global_sequence,
                              confidence_from_dict, extract_peaks, load_confidence_file,
                              plan_windows)
from vadtree.errors import CoverageViolation, InvalidInput

from oracles import peaks_bruteforce


def windows_for(scores, l_raw):
    return [LocalWindow(p.start_frame, scores[p.start_frame - 1:p.start_frame - 1 + p.length])
            for p in plan_windows(len(scores), l_raw)]


class TestPlanWindows:
    def test_stride_half_window(self):
        plans = plan_windows(20, 8)
        assert [p.start_frame for p in plans] == [1, 5, 9, 13, 17]
        assert [p.retain for p in plans] == [(1, 7), (7, 11), (11, 15), (15, 19), (19, 21)]

    def test_short_video_single_window(self):
        assert plan_windows(5, 8)[0].retain == (1, 6)
        assert len(plan_windows(8, 8)) == 1

    @pytest.mark.parametrize("l_raw", [0, 3, 7])
    def test_rejects_odd_window(self, l_raw):
        with pytest.raises(InvalidInput):
            plan_windows(20, l_raw)

    @given(st.integers(1, 3000), st.integers(1, 200).map(lambda h: 2 * h))
    @settings(max_examples=300, deadline=None)
    def test_retained_ranges_tile(self, T, l_raw):
        plans = plan_windows(T, l_raw)
        frames = [t for p in plans for t in range(*p.retain)]
        assert frames == list(range(1, T + 1))
        for p in plans:
            assert p.start_frame <= p.retain[0] and p.retain[1] - 1 <= p.start_frame + p.length - 1


class TestAssembly:
    def test_two_windows_hand_trace(self):
        w1 = LocalWindow(1, [0.1] * 8)
        w2 = LocalWindow(5, [0.2] * 8)
        seq = assemble_global_sequence([w1, w2], 12, "v", l_raw=8)
        assert len(seq.points) == 12
        assert list(seq.values[:6]) == [0.1] * 6
        assert list(seq.values[6:]) == [0.2] * 6

    def test_single_window_is_identity(self):
        scores = [0.1, 0.4, 0.2, 0.9, 0.3]
        seq = assemble_global_sequence([LocalWindow(1, scores)], 5, "v")
        assert list(seq.values) == scores

    def test_missing_window_names_frame(self):
        scores = list(np.linspace(0, 1, 20))
        ws = windows_for(scores, 8)
        del ws[2]
        with pytest.raises(CoverageViolation) as err:
            assemble_global_sequence(ws, 20, "v", l_raw=8)
        assert err.value.frame == 11

    def test_out_of_range_confidence(self):
        with pytest.raises(InvalidInput):
            LocalWindow(1, [0.2, 1.3])

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=400),
           st.integers(1, 40).map(lambda h: 2 * h))
    @settings(max_examples=200, deadline=None)
    def test_assembly_recovers_global_sequence(self, scores, l_raw):
        seq = assemble_global_sequence(windows_for(scores, l_raw), len(scores), "v", l_raw)
        assert [t for t, _ in seq.points] == list(range(1, len(scores) + 1))
        assert list(seq.values) == scores

    def test_dict_requires_exactly_one_source(self):
        with pytest.raises(InvalidInput, match="exactly one"):
            confidence_from_dict({"video_id": "v", "num_frames": 3})
        with pytest.raises(InvalidInput, match="global_scores"):
            confidence_from_dict({"video_id": "v", "num_frames": 3, "global_scores": [0.1]})

    def test_load_file(self, tmp_path):
        p = tmp_path / "v.json"
        p.write_text(json.dumps({"video_id": "v", "num_frames": 3, "global_scores": [0, 1, 0]}))
        assert load_confidence_file(p).num_frames == 3


class TestPeaks:
    @pytest.mark.parametrize("c, expected", [
        ([0.1, 0.5, 0.3], [(2, 0.5)]),
        ([0.2, 0.5, 0.5, 0.2], [(2, 0.5)]),
        ([0.1, 0.2, 0.3, 0.4], []),
        ([0.5, 0.5], []),
    ])
    def test_examples(self, c, expected):
        assert list(extract_peaks(ConfidenceSequence.from_scores("v", c)).peaks) == expected

    @given(st.lists(st.sampled_from([0.0, 0.1, 0.2, 0.5, 0.9, 1.0]), max_size=60))
    @settings(max_examples=300, deadline=None)
    def test_sound_and_complete_modulo_plateaus(self, c):
        if not c:
            return
        peaks = extract_peaks(ConfidenceSequence.from_scores("v", c)).peaks
        got = [t for t, _ in peaks]
        for t in got:
            assert 1 < t < len(c)
            assert c[t - 1] >= c[t - 2] and c[t - 1] >= c[t]
        for i in range(1, len(c) - 1):
            if c[i] >= c[i - 1] and c[i] >= c[i + 1]:
                j = i
                # walk back to the head of an equal-valued qualifying run
                while (j - 1 >= 1 and c[j - 1] == c[j] and c[j - 1] >= c[j - 2]):
                    j -= 1
                assert j + 1 in got

    def test_matches_oracle_on_smooth_signal(self):
        rng = np.random.default_rng(3)
        c = np.convolve(rng.random(500), np.ones(7) / 7, mode="same").round(3).tolist()
        peaks = extract_peaks(ConfidenceSequence.from_scores("v", c)).peaks
        assert list(peaks) == peaks_bruteforce(c)
