#!/usr/bin/env python3
"""Regenerates tests/fixtures.

Writes a 20-item synthetic catalog (manifest, AEMB embeddings, PNG images),
FITB/CIR/A100 question sets, scripted MLLM responses, the text-embedding
table the scripted encoder serves, and golden outcomes computed by the numpy
reference pipeline below. The transcript and embedding caches are then built
by the C++ `fixture_cache_builder` tool from prompts.ldj and texts.ldj.

Usage: make_fixtures.py [--out tests/fixtures]
"""

from __future__ import annotations

import argparse
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

DIM = 32
SEED = 20250101
ATTRIBUTES = ["color", "style", "occasion", "season", "material", "balance"]
CATEGORY_SIZES = {"top": 5, "bottom": 4, "shoes": 5, "bag": 3, "accessory": 3}
VARIANTS = {
    # name: (identify_step, aesthetic_thoughts)
    "full": (True, True),
    "no_identify": (False, True),
    "no_aesthetics": (True, False),
}
# Ablation rows: (label, prompt variant, svaf_enabled)
GRID = [
    ("full", "full", True),
    ("ide-off", "no_identify", True),
    ("svaf-off", "full", False),
    ("svaf+aes-off", "no_aesthetics", False),
]
TAU = 0.01
RECALL_KS = [1, 2, 3]


# ---------------------------------------------------------------------------
# AEMB writer (independent of the C++ encoder)


def write_aemb(path: Path, records: list[tuple[str, np.ndarray]]) -> None:
    dim = len(records[0][1])
    out = bytearray(b"AEMB")
    out += struct.pack("<IIQ", 1, dim, len(records))
    for item_id, vec in records:
        raw = item_id.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += np.asarray(vec, dtype="<f4").tobytes()
    path.write_bytes(bytes(out))


def write_ldj(path: Path, rows: list[dict]) -> None:
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), encoding="utf-8")


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def f32_unit(v: np.ndarray) -> np.ndarray:
    """What the engine holds after loading a float32 unit row."""
    return np.asarray(unit(v), dtype=np.float32).astype(np.float64)


# ---------------------------------------------------------------------------
# Reference pipeline (float64 numpy, brute force)


def softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max()
    e = np.exp(z)
    return e / e.sum()


def entropy(sims: np.ndarray) -> float:
    p = softmax(sims)
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def reference_query(outfit, text, attrs, pool, svaf: bool, tau: float = TAU, sign: int = 1):
    t = unit(text)
    if not svaf:
        return t, {}
    o = np.stack(outfit)
    w = softmax(o @ t / tau)
    v_i = unit(w @ o)
    cues = [("visual", v_i), ("text", t)]
    diag = {"saliency_weights": w.tolist()}
    if attrs:
        a = np.stack([unit(x) for x in attrs])
        s = (a @ t + a @ v_i) / 2.0
        raw = np.exp(sign * s)
        cues.append(("aesthetic", unit(raw @ a)))
    c = np.stack(pool)
    ent = {name: entropy(c @ v) for name, v in cues}
    g = np.array([np.exp(-ent[name]) for name, _ in cues])
    g /= g.sum()
    q = unit(sum(gi * v for gi, (_, v) in zip(g, cues)))
    diag["gates"] = {name: float(gi) for gi, (name, _) in zip(g, cues)}
    diag["cue_entropies"] = ent
    return q, diag


def rank(q, ids, vectors):
    scores = [float(q @ v) for v in vectors]
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    return [(ids[i], scores[i]) for i in order]


# ---------------------------------------------------------------------------
# Fixture construction


class Builder:
    def __init__(self, out: Path):
        self.out = out
        self.rng = np.random.default_rng(SEED)
        self.items: list[dict] = []
        self.emb: dict[str, np.ndarray] = {}
        self.by_cat: dict[str, list[str]] = {}
        self.texts: dict[str, np.ndarray] = {}
        self.prompts: list[dict] = []
        # (question_id, variant) -> (target text, [attribute texts])
        self.reasoning: dict[tuple[str, str], tuple[str, list[str]]] = {}

    # -- catalog ------------------------------------------------------------
    def catalog(self) -> None:
        cat_dir = self.out / "cat"
        (cat_dir / "images").mkdir(parents=True, exist_ok=True)
        centroids = {c: unit(self.rng.standard_normal(DIM)) for c in CATEGORY_SIZES}
        color_rng = np.random.default_rng(SEED + 1)
        for cat, n in CATEGORY_SIZES.items():
            for k in range(1, n + 1):
                item_id = f"{cat}-{k:02d}"
                vec = unit(0.8 * centroids[cat] + 0.6 * unit(self.rng.standard_normal(DIM)))
                self.emb[item_id] = f32_unit(vec)
                self.by_cat.setdefault(cat, []).append(item_id)
                ref = f"images/{item_id}.png"
                rgb = tuple(int(x) for x in color_rng.integers(0, 256, 3))
                img = Image.new("RGB", (24, 24), rgb)
                for x in range(0, 24, 4 + k):
                    for y in range(24):
                        img.putpixel((x, y), (255 - rgb[0], 255 - rgb[1], 255 - rgb[2]))
                img.save(cat_dir / ref, format="PNG", optimize=False)
                self.items.append(
                    {
                        "item_id": item_id,
                        "category": cat,
                        "description": f"synthetic {cat} {k}",
                        "image_ref": ref,
                    }
                )
        write_ldj(cat_dir / "manifest.ldj", self.items)
        write_aemb(
            cat_dir / "embeddings.aemb",
            [(i["item_id"], self.emb[i["item_id"]].astype(np.float32)) for i in self.items],
        )

    # -- scripted reasoning ---------------------------------------------------
    def design(self, qid: str, aim: str, seed: int) -> dict[str, tuple[np.ndarray, list[np.ndarray]]]:
        """Text and attribute vectors per variant, all pulled toward `aim`."""
        rng = np.random.default_rng(seed)
        target = self.emb[aim]
        out = {}
        for variant, (_, aesthetics) in VARIANTS.items():
            strength = 1.0 if variant != "no_identify" else 0.8
            t = unit(strength * target + 0.55 * unit(rng.standard_normal(DIM)))
            attrs = []
            if aesthetics:
                for _ in ATTRIBUTES:
                    attrs.append(unit(0.6 * target + unit(rng.standard_normal(DIM))))
            out[variant] = (t, attrs)
        return out

    def register(self, qid: str, vectors, kind: str, outfit, extra: dict) -> None:
        for variant, (t, attrs) in vectors.items():
            identify, aesthetics = VARIANTS[variant]
            desc = f"{qid}/{variant}: a piece that completes the outfit"
            # Raw encoder outputs are deliberately not unit length.
            self.texts[desc] = t * 2.5
            body = {"target_description": desc}
            attr_texts = []
            if identify:
                body["identification"] = [f"{qid} item {n + 1}" for n in range(len(outfit))]
            if aesthetics:
                body["attributes"] = {}
                for name, a in zip(ATTRIBUTES, attrs):
                    keyword = f"{name}-{qid}-{variant}"
                    reason = f"keeps the {name} coherent"
                    body["attributes"][name] = {"keyword": keyword, "reason": reason}
                    text = f"{keyword}: {reason}"
                    self.texts[text] = a * 0.75
                    attr_texts.append(text)
            raw = json.dumps(body, indent=2)
            if len(self.prompts) % 3 == 0:
                raw = "Here is the analysis.\n```json\n" + raw + "\n```\n"
            self.reasoning[(qid, variant)] = (desc, attr_texts)
            self.prompts.append(
                {
                    "question_id": qid,
                    "variant": variant,
                    "identify_step": identify,
                    "aesthetic_thoughts": aesthetics,
                    "kind": kind,
                    "outfit_item_ids": outfit,
                    **extra,
                    "response": raw,
                }
            )

    def vectors_for(self, qid: str, variant: str):
        desc, attr_texts = self.reasoning[(qid, variant)]
        return self.texts[desc], [self.texts[t] for t in attr_texts]

    def choose(self, qid, outfit, candidates, variant, svaf):
        t, attrs = self.vectors_for(qid, variant)
        pool = [self.emb[c] for c in candidates]
        q, diag = reference_query([self.emb[o] for o in outfit], t, attrs, pool, svaf)
        ranked = rank(q, candidates, pool)
        return ranked, diag

    def complete(self, qid, outfit, category, variant, svaf):
        t, attrs = self.vectors_for(qid, variant)
        ids = self.by_cat[category]
        pool = [self.emb[c] for c in ids]
        q, diag = reference_query([self.emb[o] for o in outfit], t, attrs, pool, svaf)
        return rank(q, ids, pool), diag

    @staticmethod
    def gaps_ok(ranked, minimum=1e-3) -> bool:
        scores = [s for _, s in ranked]
        return all(a - b >= minimum for a, b in zip(scores, scores[1:]))

    def pick(self, qid, aim, kind, outfit, extra, accept) -> None:
        for attempt in range(10_000):
            vectors = self.design(qid, aim, seed=hash_seed(qid, attempt))
            saved = dict(self.texts), list(self.prompts), dict(self.reasoning)
            self.register(qid, vectors, kind, outfit, extra)
            if accept():
                return
            self.texts, self.prompts, self.reasoning = saved
        raise RuntimeError(f"no acceptable design for {qid}")

    # -- question sets ---------------------------------------------------------
    def questions(self) -> dict:
        rng = np.random.default_rng(SEED + 2)
        expected: dict = {"grid": [g[0] for g in GRID], "fitb": {}, "cir": {}, "a100": {}}
        others = lambda missing: [c for c in CATEGORY_SIZES if c != missing]

        # FITB: 3 of 5 designed to be answered correctly by the full pipeline.
        fitb_rows = []
        for n, (missing, correct) in enumerate(
            [("top", True), ("bottom", True), ("shoes", False), ("top", True), ("bottom", False)], 1
        ):
            qid = f"fitb-{n:02d}"
            outfit = [str(rng.choice(self.by_cat[c])) for c in others(missing)[:3]]
            candidates = [str(x) for x in rng.permutation(self.by_cat[missing])[:4]]
            answer = int(rng.integers(0, 4))
            aim = candidates[answer] if correct else candidates[(answer + 1) % 4]
            fitb_rows.append(
                {
                    "question_id": qid,
                    "outfit_item_ids": outfit,
                    "candidate_item_ids": candidates,
                    "answer_index": answer,
                }
            )

            def accept(qid=qid, outfit=outfit, candidates=candidates, aim=aim):
                for _, variant, svaf in GRID:
                    ranked, _ = self.choose(qid, outfit, candidates, variant, svaf)
                    if not self.gaps_ok(ranked[:2], 1e-2):
                        return False
                ranked, _ = self.choose(qid, outfit, candidates, "full", True)
                return ranked[0][0] == aim

            self.pick(qid, aim, "fitb", outfit, {"candidate_item_ids": candidates}, accept)
        write_ldj(self.out / "fitb.ldj", fitb_rows)

        # CIR: ground truth ranked first for three queries.
        cir_rows = []
        for n, (category, first) in enumerate(
            [("shoes", True), ("top", True), ("bag", False), ("bottom", True), ("shoes", False)], 1
        ):
            qid = f"cir-{n:02d}"
            outfit = [str(rng.choice(self.by_cat[c])) for c in others(category)[:2]]
            members = self.by_cat[category]
            gt = str(rng.choice(members))
            aim = gt if first else next(m for m in members if m != gt)
            cir_rows.append(
                {
                    "query_id": qid,
                    "outfit_item_ids": outfit,
                    "target_category": category,
                    "ground_truth_item_id": gt,
                }
            )

            def accept(qid=qid, outfit=outfit, category=category, aim=aim):
                for _, variant, svaf in GRID:
                    ranked, _ = self.complete(qid, outfit, category, variant, svaf)
                    if not self.gaps_ok(ranked, 1e-3):
                        return False
                ranked, _ = self.complete(qid, outfit, category, "full", True)
                return ranked[0][0] == aim

            self.pick(qid, aim, "cir", outfit, {"target_category": category}, accept)
        write_ldj(self.out / "cir.ldj", cir_rows)

        # A100-style: five LAT (vote shares) and five AAT (attribute tags).
        a100_rows = []
        plan = [("LAT", None, True), ("LAT", None, True), ("LAT", None, False), ("LAT", None, True),
                ("LAT", None, True), ("AAT", "color", True), ("AAT", "style", True),
                ("AAT", "occasion", False), ("AAT", "season", True), ("AAT", "color", True)]
        shares_bank = [[0.4, 0.3, 0.2, 0.1], [0.55, 0.25, 0.15, 0.05], [0.7, 0.1, 0.1, 0.1]]
        for n, (kind, tag, correct) in enumerate(plan, 1):
            qid = f"a100-{n:02d}"
            missing = ["top", "bottom", "shoes"][n % 3]
            outfit = [str(rng.choice(self.by_cat[c])) for c in others(missing)[:3]]
            candidates = [str(x) for x in rng.permutation(self.by_cat[missing])[:4]]
            answer = int(rng.integers(0, 4))
            aim = candidates[answer] if correct else candidates[(answer + 2) % 4]
            row = {
                "question_id": qid,
                "test_kind": kind,
                "outfit_item_ids": outfit,
                "candidate_item_ids": candidates,
                "answer_index": answer,
            }
            if kind == "LAT":
                shares = list(shares_bank[n % 3])
                # Highest share on the answer, the rest in order.
                order = [answer] + [i for i in range(4) if i != answer]
                vote = [0.0] * 4
                for slot, share in zip(order, shares):
                    vote[slot] = share
                row["vote_shares"] = vote
            else:
                row["attribute_tag"] = tag
            a100_rows.append(row)

            def accept(qid=qid, outfit=outfit, candidates=candidates, aim=aim):
                for _, variant, svaf in GRID:
                    ranked, _ = self.choose(qid, outfit, candidates, variant, svaf)
                    if not self.gaps_ok(ranked[:2], 1e-2):
                        return False
                ranked, _ = self.choose(qid, outfit, candidates, "full", True)
                return ranked[0][0] == aim

            self.pick(qid, aim, "fitb", outfit, {"candidate_item_ids": candidates}, accept)
        write_ldj(self.out / "a100.ldj", a100_rows)

        # Service golden request (also what the UI round trip drives).
        svc = {"outfit_item_ids": ["top-02", "bottom-03"], "target_category": "shoes", "k": 5}

        def accept_svc():
            ranked, _ = self.complete("svc-01", svc["outfit_item_ids"], "shoes", "full", True)
            return self.gaps_ok(ranked, 1e-3)

        self.pick("svc-01", "shoes-04", "cir", svc["outfit_item_ids"],
                  {"target_category": "shoes"}, accept_svc)

        # Expected outcomes per ablation row.
        for label, variant, svaf in GRID:
            fitb = {}
            for r in fitb_rows:
                ranked, diag = self.choose(r["question_id"], r["outfit_item_ids"],
                                           r["candidate_item_ids"], variant, svaf)
                chosen = r["candidate_item_ids"].index(ranked[0][0])
                fitb[r["question_id"]] = {"chosen": chosen, "correct": chosen == r["answer_index"],
                                          "gates": diag.get("gates", {})}
            cir = {}
            for r in cir_rows:
                ranked, _ = self.complete(r["query_id"], r["outfit_item_ids"],
                                          r["target_category"], variant, svaf)
                ids = [i for i, _ in ranked]
                cir[r["query_id"]] = {"top_ids": ids,
                                      "ground_truth_rank": ids.index(r["ground_truth_item_id"]) + 1}
            a100 = {}
            for r in a100_rows:
                ranked, _ = self.choose(r["question_id"], r["outfit_item_ids"],
                                        r["candidate_item_ids"], variant, svaf)
                chosen = r["candidate_item_ids"].index(ranked[0][0])
                a100[r["question_id"]] = {"chosen": chosen, "correct": chosen == r["answer_index"]}
            expected["fitb"][label] = fitb
            expected["cir"][label] = cir
            expected["a100"][label] = a100

        ranked, diag = self.complete("svc-01", svc["outfit_item_ids"], "shoes", "full", True)
        desc, _ = self.reasoning[("svc-01", "full")]
        expected["service"] = {
            "request": svc,
            "items": [{"item_id": i, "score": s} for i, s in ranked[: svc["k"]]],
            "target_description": desc,
            "gates": diag["gates"],
        }
        full = expected["fitb"]["full"]
        expected["fitb_accuracy_full"] = sum(v["correct"] for v in full.values()) / len(full)
        expected["recall_ks"] = RECALL_KS
        return expected

    # -- single-case fixtures ----------------------------------------------------
    def fusion_case(self) -> None:
        rng = np.random.default_rng(SEED + 3)
        d = self.out / "fusion_case_01"
        d.mkdir(parents=True, exist_ok=True)
        dim = 16
        outfit = [unit(rng.standard_normal(dim)) for _ in range(3)]
        text = unit(rng.standard_normal(dim) + 0.5 * outfit[0])
        attrs = [unit(rng.standard_normal(dim) + 0.3 * text) for _ in ATTRIBUTES]
        pool = [unit(rng.standard_normal(dim)) for _ in range(8)]
        as32 = lambda v: np.asarray(v, dtype=np.float32)
        write_aemb(d / "outfit.aemb", [(f"o{i}", as32(v)) for i, v in enumerate(outfit)])
        write_aemb(d / "text.aemb", [("target", as32(text))])
        write_aemb(d / "attributes.aemb", [(a, as32(v)) for a, v in zip(ATTRIBUTES, attrs)])
        write_aemb(d / "pool.aemb", [(f"c{i}", as32(v)) for i, v in enumerate(pool)])
        f64 = lambda v: as32(v).astype(np.float64)
        o = [f64(v) for v in outfit]
        t = unit(f64(text))
        a = [unit(f64(v)) for v in attrs]
        p = [unit(f64(v)) for v in pool]
        w = softmax(np.stack(o) @ t / TAU)
        v_i = unit(w @ np.stack(o))
        s = (np.stack(a) @ t + np.stack(a) @ v_i) / 2
        raw = np.exp(s)
        v_aes = unit(raw @ np.stack(a))
        q, diag = reference_query(o, t, a, p, True)
        golden = {
            "tau": TAU,
            "saliency_weights": w.tolist(),
            "visual": v_i.tolist(),
            "attribute_scores": dict(zip(ATTRIBUTES, s.tolist())),
            "attribute_weights": dict(zip(ATTRIBUTES, (raw / raw.sum()).tolist())),
            "aesthetic": v_aes.tolist(),
            "cue_entropies": diag["cue_entropies"],
            "gates": diag["gates"],
            "q": q.tolist(),
        }
        (d / "golden.json").write_text(json.dumps(golden, indent=2) + "\n", encoding="utf-8")

    def fitb_case(self) -> None:
        rng = np.random.default_rng(SEED + 4)
        d = self.out / "fitb_case_01"
        d.mkdir(parents=True, exist_ok=True)
        dim = 24
        ids = [f"cand-{i}" for i in range(6)]
        vecs = [unit(rng.standard_normal(dim)) for _ in ids]
        query = unit(rng.standard_normal(dim) + 0.4 * vecs[3])
        rows = [{"item_id": i, "category": "shoes", "description": "", "image_ref": f"images/{i}.png"}
                for i in ids]
        write_ldj(d / "manifest.ldj", rows)
        write_aemb(d / "embeddings.aemb", [(i, np.asarray(v, np.float32)) for i, v in zip(ids, vecs)])
        write_aemb(d / "query.aemb", [("q", np.asarray(query, np.float32))])
        q = unit(np.asarray(query, np.float32).astype(np.float64))
        scores = [float(q @ np.asarray(v, np.float32).astype(np.float64)) for v in vecs]
        best = max(range(len(ids)), key=lambda i: (scores[i], -i))
        golden = {"candidate_item_ids": ids, "scores": scores, "argmax": best}
        (d / "golden.json").write_text(json.dumps(golden, indent=2) + "\n", encoding="utf-8")

    def misc(self) -> None:
        bad = self.out / "bad_manifest"
        bad.mkdir(parents=True, exist_ok=True)
        rows = self.items[:3] + [dict(self.items[1])]
        write_ldj(bad / "manifest.ldj", rows)
        config = {
            "catalog": "cat",
            "mode": "replay",
            "parallelism": 2,
            "service": {"host": "127.0.0.1", "port": 0, "cors_origin": "http://localhost:5173",
                        "request_timeout_s": 30},
        }
        (self.out / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")


def hash_seed(qid: str, attempt: int) -> int:
    h = 2166136261
    for ch in qid.encode():
        h = ((h ^ ch) * 16777619) & 0xFFFFFFFF
    return h * 1000 + attempt


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "tests" / "fixtures")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    b = Builder(args.out)
    b.catalog()
    expected = b.questions()
    b.fusion_case()
    b.fitb_case()
    b.misc()

    write_ldj(args.out / "prompts.ldj", b.prompts)
    write_ldj(
        args.out / "texts.ldj",
        [{"text": t, "embedding": np.asarray(v, np.float32).tolist()} for t, v in sorted(b.texts.items())],
    )
    (args.out / "expected.json").write_text(json.dumps(expected, indent=2) + "\n", encoding="utf-8")
    print(f"fixtures written to {args.out}: {len(b.prompts)} prompts, {len(b.texts)} texts, "
          f"FITB accuracy (full) {expected['fitb_accuracy_full']:.3f}")


if __name__ == "__main__":
    main()
