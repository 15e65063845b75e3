import csv

from verigauge.ingest import ImageRecord


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def rec(image_id, subject_id, **attrs):
    return ImageRecord(image_id, subject_id, attrs)


def mirrored_corpus(directory, n_subjects=20, images=3, genuine_delta=0.0, impostor_delta=0.0, seed=0, **config):
    """Two-group corpus whose group B copies group A's pairs and scores, shifted by constants.

    Returns the path of an audit config that points at the written files.
    """
    import json

    import numpy as np

    from verigauge.ingest import ScoreTable, write_metadata, write_scores
    from verigauge.synthetic import ScenarioSpec, generate_scores

    spec = ScenarioSpec.model_validate(
        {"seed": seed, "groups": [{"group_label": "A", "n_subjects": n_subjects, "images_per_subject": images,
                                   "genuine_mean": 2.0}]}
    )
    a = generate_scores(spec).groups["A"]
    rename = lambda i: "B" + i[1:]  # noqa: E731
    records = list(a.pairs.records) + [
        ImageRecord(rename(r.image_id), rename(r.subject_id), {"race": "B"}) for r in a.pairs.records
    ]
    entries = {}
    for (x, y), s in a.genuine_items():
        entries[(x, y)] = s
        entries[(rename(x), rename(y))] = s + genuine_delta
    for (x, y), s in a.impostor_items():
        entries[(x, y)] = s
        entries[(rename(x), rename(y))] = s + impostor_delta
    # cross-group pairs, needed only by policies that do not yoke on race
    ids = [r.image_id for r in a.pairs.records]
    cross = np.random.default_rng(seed).normal(0.0, 1.0, (len(ids), len(ids)))
    for i, x in enumerate(ids):
        for j, y in enumerate(ids):
            entries[(x, rename(y))] = float(cross[i, j])
    write_metadata(records, directory / "metadata.csv")
    write_scores(ScoreTable(entries), directory / "scores.csv")
    cfg = {"metadata": "metadata.csv", "scores": "scores.csv", **config}
    (directory / "audit_config.json").write_text(json.dumps(cfg, indent=2))
    return directory / "audit_config.json"
