"""Computes the expected audit values for the scripted mock server.

Reads mock_schema.json, mock_contexts.json and mock_script.json and writes
mock_expected.json. Straight transcription of the metric definitions;
every sum is exactly rounded (math.fsum), so the values are unique.
"""
import json
import math
import os

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(HERE, name)) as f:
        return json.load(f)


def key(prompt):
    return " ".join(prompt.replace("[Y]", "").split())


def main():
    schema = load("mock_schema.json")
    contexts = load("mock_contexts.json")
    script = load("mock_script.json")
    tables = {key(p): t for p, t in script["tables"].items()}
    cats = schema["categories"]
    candidates = []
    for c in cats:
        for w in c["words"]:
            if w not in candidates:
                candidates.append(w)
    ref = 1.0 / len(cats)
    templates = contexts["templates"]
    total = sum(t["count"] for t in templates)
    cw = [t["count"] / total for t in templates]

    def cell(template, word):
        prompt = template.replace("[X]", word)
        table = tables[key(prompt)]
        probs = {w: (math.exp(table[w]) if w in table else 0.0) for w in candidates}
        mass = [math.fsum(probs[w] for w in c["words"]) for c in cats]
        z = math.fsum(mass)
        return [m / z for m in mass]

    def j_inf(s):
        return max([0.0] + [v for v in s if v > 0])

    per_group = {}
    for g in schema["groups"]:
        stereos = []
        for t in templates:
            p = cell(t["skeleton"], g["words"][0])
            stereos.append([pi / ref - 1.0 for pi in p])
        r = math.fsum(j_inf(s) * w for s, w in zip(stereos, cw))
        mean = [math.fsum(w * s[i] for s, w in zip(stereos, cw)) for i in range(len(cats))]
        rp = j_inf(mean)
        per_group[g["id"]] = {"r": r, "r_p": rp, "r_v": r - rp}

    def overall(weights):
        return {
            name: math.fsum(weights[g] * per_group[g][part] for g in per_group)
            for name, part in [("R", "r"), ("R_p", "r_p"), ("R_v", "r_v")]
        }

    n = len(schema["groups"])
    uniform = {g["id"]: 1.0 / n for g in schema["groups"]}
    wt = sum(g["weight"] for g in schema["groups"])
    weighted = {g["id"]: g["weight"] / wt for g in schema["groups"]}
    expected = {
        "per_group": per_group,
        "overall_uniform": overall(uniform),
        "overall_weighted": overall(weighted),
    }
    with open(os.path.join(HERE, "mock_expected.json"), "w") as f:
        json.dump(expected, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
