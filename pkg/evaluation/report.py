"""
Report
CSV persistence of robustness curves, SVG panels and the paired summary
"""

import csv
import logging
import re
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from common.errors import ArtifactIOError, ParameterError
from evaluation.robustness import CurvePoint, RobustnessCurve
from schema.result_schemas import get_result_schema
from schema.schema_validator import validator

logger = logging.getLogger(__name__)

CSV_FIELDS = ["model", "attack", "epsilon", "n_samples", "n_correct", "accuracy"]
ATTACK_TITLES = {"fgsm": "FGSM", "bim": "BIM", "pgd": "PGD", "mim": "MIM"}


def write_csv(curves, path):
    """
    Write curves as `model,attack,epsilon,n_samples,n_correct,accuracy` rows

    Floats are written with repr so that reading the file back gives
    the same values.
    """
    if not curves:
        raise ParameterError("no curves to write")
    path = Path(path)
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_FIELDS)
            for curve in curves:
                for point in curve.points:
                    writer.writerow([curve.model_label, curve.attack, repr(point.epsilon),
                                     point.n_samples, point.n_correct, repr(point.accuracy)])
    except OSError as e:
        raise ArtifactIOError(f"cannot write curves to {path}: {e}")
    logger.info(f"Curves written to {path}")
    return path


def read_csv(path):
    """
    Parse a curves CSV back into RobustnessCurve objects

    Rows are validated against the curve-row schema and grouped by
    (model, attack) in order of first appearance.
    """
    path = Path(path)
    curves = {}
    try:
        with open(path, newline="") as f:
            for raw in csv.DictReader(f):
                try:
                    row = {"model": raw["model"], "attack": raw["attack"],
                           "epsilon": float(raw["epsilon"]), "n_samples": int(raw["n_samples"]),
                           "n_correct": int(raw["n_correct"]), "accuracy": float(raw["accuracy"])}
                except (KeyError, TypeError, ValueError) as e:
                    raise ParameterError(f"{path}: malformed row {raw}: {e}")
                validator.require(row, get_result_schema('curve_row'), f"curve row in {path}")
                key = (row["model"], row["attack"])
                if key not in curves:
                    curves[key] = RobustnessCurve(row["model"], row["attack"])
                curves[key].points.append(CurvePoint(row["epsilon"], row["n_samples"], row["n_correct"]))
    except OSError as e:
        raise ArtifactIOError(f"cannot read curves from {path}: {e}")
    return list(curves.values())


def _gid(text):
    return re.sub(r"[^A-Za-z0-9_-]+", "_", text)


def render_svg(curves, path):
    """
    One panel per attack, epsilon on x, accuracy on y, one polyline per model

    Panels carry the SVG id `panel-<attack>`, lines `curve-<attack>-<model>`.
    """
    if not curves:
        raise ParameterError("no curves to render")
    attacks = list(dict.fromkeys(c.attack for c in curves))
    labels = list(dict.fromkeys(c.model_label for c in curves))

    with plt.rc_context({"svg.hashsalt": "salgrad", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(1, len(attacks), figsize=(4.2 * len(attacks), 3.6),
                                 sharey=True, squeeze=False)
        for ax, attack in zip(axes[0], attacks):
            ax.set_gid(f"panel-{_gid(attack)}")
            for curve in (c for c in curves if c.attack == attack):
                style = "-o" if labels.index(curve.model_label) == 0 else "--s"
                (line,) = ax.plot(curve.epsilons, curve.accuracies, style, markersize=3.5,
                                  label=curve.model_label)
                line.set_gid(f"curve-{_gid(attack)}-{_gid(curve.model_label)}")
            ax.set_title(ATTACK_TITLES.get(attack, attack))
            ax.set_xlabel("epsilon")
            ax.set_ylim(-0.02, 1.02)
            ax.grid(True, alpha=0.3)
            ax.legend(loc="lower left", fontsize=8)
        axes[0][0].set_ylabel("accuracy")
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise ArtifactIOError(f"cannot write SVG {path}: {e}")
        finally:
            plt.close(fig)
    logger.info(f"SVG written to {path}")
    return path


def compare_curves(saliency_curves, regular_curves):
    """
    Pair saliency and regular curves by attack and epsilon

    Returns:
        Rows (attack, epsilon, saliency_acc, regular_acc, delta, sign) with
        delta = saliency - regular and sign in {'+', '-', '0'}
    """
    regular = {c.attack: c for c in regular_curves}
    rows = []
    for curve in saliency_curves:
        baseline = regular.get(curve.attack)
        if baseline is None:
            continue
        base_points = {p.epsilon: p for p in baseline.points}
        for point in curve.points:
            other = base_points.get(point.epsilon)
            if other is None:
                continue
            delta = point.accuracy - other.accuracy
            sign = "+" if delta > 0 else "-" if delta < 0 else "0"
            rows.append((curve.attack, point.epsilon, point.accuracy, other.accuracy, delta, sign))
    return rows


def summary_lines(rows):
    """`delta,<attack>,<eps>,<saliency-regular>,<sign>` per paired point"""
    return [f"delta,{attack},{eps:g},{delta:+.4f},{sign}" for attack, eps, _, _, delta, sign in rows]


def write_summary(rows, path):
    try:
        Path(path).write_text("\n".join(summary_lines(rows)) + "\n")
    except OSError as e:
        raise ArtifactIOError(f"cannot write summary {path}: {e}")
    logger.info(f"Summary written to {path}")
    return path


def soft_monotonicity(curve, slack=0.02):
    """Epsilons at which accuracy rises by more than slack over the previous point"""
    rises = []
    for before, after in zip(curve.points, curve.points[1:]):
        if after.accuracy > before.accuracy + slack:
            rises.append(after.epsilon)
    if rises:
        logger.warning(f"{curve.model_label}/{curve.attack}: accuracy rises at epsilon {rises}")
    return rises
