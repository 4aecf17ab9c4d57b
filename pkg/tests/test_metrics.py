import json

import pytest

from cnocs import EvalCase, eval_metrics
from cnocs.metrics import circular_error_deg, load_cases
from cnocs.scene import Rect


def case(iou=None, target=0.0, estimated=0.0, **kw):
    return EvalCase(target_azimuth_deg=target, estimated_azimuth_deg=estimated,
                    iou=iou, **kw)


class TestCircularError:
    def test_wraparound(self):
        assert circular_error_deg(350.0, 10.0) == pytest.approx(20.0)
        assert circular_error_deg(10.0, 350.0) == pytest.approx(20.0)

    def test_plain(self):
        assert circular_error_deg(0.0, 180.0) == pytest.approx(180.0)
        assert circular_error_deg(90.0, 90.0) == 0.0


class TestEvalMetrics:
    def test_direct_formula(self):
        cases = [case(iou=v) for v in (0.7, 0.5, 0.9)]
        got = eval_metrics(cases)
        assert got.acc_ls == pytest.approx(2 / 3)
        assert got.miou == pytest.approx(0.7)

    def test_wraparound_counts_toward_tolerance(self):
        got = eval_metrics([case(iou=1.0, target=350.0, estimated=10.0)])
        assert got.abs_err == pytest.approx(20.0)
        assert got.acc_at_22_5 == 1.0

    def test_perfect_predictions(self):
        cases = [case(iou=1.0, target=t, estimated=t) for t in (0, 90, 270)]
        got = eval_metrics(cases)
        assert (got.acc_ls, got.miou, got.abs_err, got.acc_at_22_5) == (1.0, 1.0, 0.0, 1.0)

    def test_threshold_is_strictly_above_0_6(self):
        got = eval_metrics([case(iou=0.6), case(iou=0.6000001)])
        assert got.acc_ls == 0.5

    def test_tolerance_boundary_inclusive(self):
        got = eval_metrics([case(iou=1.0, target=0.0, estimated=22.5),
                            case(iou=1.0, target=0.0, estimated=22.6)])
        assert got.acc_at_22_5 == 0.5

    def test_permutation_invariant(self, rng):
        cases = [case(iou=float(rng.random()), target=float(rng.uniform(0, 360)),
                      estimated=float(rng.uniform(0, 360))) for _ in range(30)]
        base = eval_metrics(cases)
        shuffled = list(cases)
        rng.shuffle(shuffled)
        assert eval_metrics(shuffled) == base

    def test_rect_cases_resolve_iou(self):
        c = case(gt_rect=Rect(0, 0, 2, 2), det_rect=Rect(1, 1, 3, 3))
        assert c.resolved_iou() == pytest.approx(1 / 7)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            eval_metrics([])


class TestLoadCases:
    def test_jsonl_both_forms(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        lines = [
            {"iou": 0.8, "target_azimuth": 10, "estimated_azimuth": 30},
            {"gt_rect": [0, 0, 2, 2], "det_rect": [1, 1, 3, 3],
             "target_azimuth": 350, "estimated_azimuth": 10},
        ]
        path.write_text("\n".join(json.dumps(d) for d in lines) + "\n")
        cases = load_cases(path)
        assert len(cases) == 2
        assert cases[0].resolved_iou() == 0.8
        assert cases[1].resolved_iou() == pytest.approx(1 / 7)
        got = eval_metrics(cases)
        assert got.abs_err == pytest.approx((20 + 20) / 2)

    def test_bad_record(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        path.write_text(json.dumps({"iou": 1.0}) + "\n")
        with pytest.raises(ValueError):
            load_cases(path)
