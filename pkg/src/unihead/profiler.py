"""Exact MAC and parameter accounting.

count() propagates shapes symbolically (no tensor math) and must agree with
the instrumented counter on a real forward pass, entry for entry — that
agreement is itself a tested invariant. Accounting convention: 1 MAC =
1 FLOP; softmax, normalization, activations, plain adds and constant
scalings are excluded from MACs and reported in a separate element-count
tally; zero-padded conv taps are charged at full cost.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .cit import cca_flops
from .config import HeadConfig
from .dat import eda_flops
from .head import Head


@dataclass
class LayerCost:
    name: str
    macs: int
    params: int


@dataclass
class ClosedFormCheck:
    formula_name: str
    expected: int
    measured: int
    match: bool


@dataclass
class CostReport:
    entries: list[LayerCost] = field(default_factory=list)
    closed_form_checks: list[ClosedFormCheck] = field(default_factory=list)
    non_mac_ops: dict[str, int] = field(default_factory=dict)
    flops_convention: str = "1 MAC = 1 FLOP"

    def add(self, name: str, macs: int, params: int) -> None:
        self.entries.append(LayerCost(name, int(macs), int(params)))

    def check(self, formula_name: str, expected: int, measured: int) -> None:
        self.closed_form_checks.append(
            ClosedFormCheck(formula_name, int(expected), int(measured),
                            int(expected) == int(measured)))

    def tally(self, category: str, n: int) -> None:
        self.non_mac_ops[category] = self.non_mac_ops.get(category, 0) + int(n)

    @property
    def total_macs(self) -> int:
        return sum(e.macs for e in self.entries)

    @property
    def total_params(self) -> int:
        return sum(e.params for e in self.entries)

    def macs_by_name(self) -> dict[str, int]:
        return {e.name: e.macs for e in self.entries}

    def all_checks_pass(self) -> bool:
        return all(c.match for c in self.closed_form_checks)

    def to_dict(self) -> dict:
        return {
            "entries": [{"name": e.name, "macs": e.macs, "params": e.params}
                        for e in self.entries],
            "totals": {"macs": self.total_macs, "params": self.total_params,
                       "flops_2x_macs": 2 * self.total_macs},
            "closed_form_checks": [
                {"formula_name": c.formula_name, "expected": c.expected,
                 "measured": c.measured, "match": c.match}
                for c in self.closed_form_checks],
            "non_mac_ops": dict(sorted(self.non_mac_ops.items())),
            "flops_convention": self.flops_convention,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        rows = [("layer", "macs", "params")]
        rows += [(e.name, f"{e.macs:,}", f"{e.params:,}") for e in self.entries]
        rows.append(("total", f"{self.total_macs:,}", f"{self.total_params:,}"))
        widths = [max(len(r[i]) for r in rows) for i in range(3)]
        lines = [f"{r[0]:<{widths[0]}}  {r[1]:>{widths[1]}}  {r[2]:>{widths[2]}}"
                 for r in rows]
        lines.insert(1, "-" * len(lines[0]))
        lines.insert(len(lines) - 1, "-" * len(lines[0]))
        for c in self.closed_form_checks:
            status = "ok" if c.match else "MISMATCH"
            lines.append(f"check {c.formula_name}: expected {c.expected:,} "
                         f"measured {c.measured:,} [{status}]")
        lines.append(f"non-MAC element ops: "
                     + ", ".join(f"{k}={v:,}" for k, v in sorted(self.non_mac_ops.items())))
        lines.append(f"convention: {self.flops_convention} "
                     f"(2x-MAC reading: {2 * self.total_macs:,} FLOPs)")
        return "\n".join(lines)


def _dp_cost(report: CostReport, name: str, H: int, W: int, C: int) -> None:
    hw = H * W
    macs = (hw * 9 * C * 27        # offset/scale predictor conv
            + 9 * 4 * hw * C       # bilinear gathers
            + 9 * hw * C           # modulation products
            + 9 * hw * C * C)      # per-tap weight mixing
    params = (27 * C * 9 + 27) + (9 * C * C + C)
    report.add(name, macs, params)
    report.tally("activation", 9 * hw + hw * C)        # sigmoid scales + relu
    report.tally("add", 9 * 2 * hw + 8 * hw * C + hw * C)  # positions, accum, bias


_EDA_PROJECTIONS = ("wq_h", "wk_h", "wq_v", "wk_v", "wv_s", "wo")


def _dat_cost(report: CostReport, name: str, H: int, W: int, C: int,
              s: int, ffn: bool, store) -> None:
    hw = H * W
    proj = hw * (7 * C * C // 2)
    attn = s * hw * C * (H + W)
    report.add(f"{name}/norm", 0, 2 * C)
    report.add(f"{name}/eda/proj", proj, 7 * C * C // 2)
    report.add(f"{name}/eda/attn", attn, 0)
    report.add(f"{name}/eda/cab", 9 * hw * C, 10 * C)
    report.tally("layernorm", hw * C)
    report.tally("softmax", s * hw * (H + W))
    report.tally("scale", s * hw * (H + W))
    report.tally("add", hw * C + hw * C)  # cab adds + residual
    report.check(f"eda_macs[{name}]",
                 eda_flops(H, W, C) + (s - 1) * hw * C * (H + W), proj + attn)
    # Parameter law against the real arrays when a built head is profiled.
    measured_proj = (sum(store[f"{name}.{p}"].size for p in _EDA_PROJECTIONS)
                     if store is not None else 7 * C * C // 2)
    report.check(f"eda_param_law_3.5C^2[{name}]", 7 * C * C // 2, measured_proj)
    if ffn:
        report.add(f"{name}/ffn", 8 * hw * C * C, 8 * C * C + 7 * C)
        report.tally("layernorm", hw * C)
        report.tally("activation", 4 * hw * C)
        report.tally("add", 4 * hw * C + hw * C + hw * C)  # b1, b2, residual


def _cit_cost(report: CostReport, name: str, H: int, W: int, C: int) -> None:
    hw = H * W
    report.add(f"{name}/cpe", 2 * 9 * hw * C, 2 * (9 * C + C))
    for branch in ("cls", "loc"):
        # Q projection + the four half-width K/V matmuls + Qt.K + V.A.
        macs = hw * C * C + 4 * (hw * C * (C // 2)) + hw * C * C + hw * C * C
        # wq of the guiding branch plus this branch's own key/value halves.
        report.add(f"{name}/{branch}/cca", macs, C * C + 2 * (C * C // 2))
        report.add(f"{name}/{branch}/leb", 11 * hw * C, 14 * C)
        report.check(f"cca_flops[{name}/{branch}]", cca_flops(H, W, C), macs)
        report.tally("softmax", C * C)
        report.tally("scale", C * C)
    report.tally("add", 2 * hw * C + 2 * hw * C)  # cpe residuals + block residuals


def count(head: Head | HeadConfig, H: int, W: int) -> CostReport:
    """Symbolic per-layer cost of one forward pass at spatial size H x W."""
    is_head = isinstance(head, Head)
    cfg = head.cfg if is_head else head
    store = head.params if is_head else None
    cfg.validate()
    cfg.check_spatial(H, W)
    C, A = cfg.C, cfg.num_anchors
    hw = H * W
    report = CostReport()
    for i in range(cfg.n_dp):
        _dp_cost(report, f"dp{i}", H, W, C)
    for i in range(cfg.n_dat):
        _dat_cost(report, f"dat{i}", H, W, C, cfg.stripe_width, cfg.ffn_enabled, store)
    report.add("split_cls", hw * C * C, C * C + C)
    report.add("split_loc", hw * C * C, C * C + C)
    for i in range(cfg.n_cit):
        _cit_cost(report, f"cit{i}", H, W, C)
    n_cls, n_box = A * cfg.num_classes, A * 4
    report.add("pred_cls", 9 * hw * C * n_cls, 9 * C * n_cls + n_cls)
    report.add("pred_box", 9 * hw * C * n_box, 9 * C * n_box + n_box)
    if store is not None:
        report.check("param_total_vs_enumeration",
                     store.total_params(), report.total_params)
    return report


def parallel_head_baseline(C: int, n_convs: int = 4, A: int = 1,
                           num_classes: int = 80, H: int = 8, W: int = 8) -> CostReport:
    """Cost of the conventional two-tower head: n_convs stacked 3x3 C->C
    convolutions per task branch plus the same prediction layers."""
    if n_convs < 1:
        raise ValueError(f"n_convs must be >= 1, got {n_convs}")
    hw = H * W
    report = CostReport()
    for tower in ("cls_tower", "loc_tower"):
        for j in range(n_convs):
            report.add(f"{tower}/conv{j}", 9 * hw * C * C, 9 * C * C + C)
            report.tally("activation", hw * C)
    n_cls, n_box = A * num_classes, A * 4
    report.add("pred_cls", 9 * hw * C * n_cls, 9 * C * n_cls + n_cls)
    report.add("pred_box", 9 * hw * C * n_box, 9 * C * n_box + n_box)
    return report
