"""Placeholder names of the scripted seed templates: bracketed spans with no
inner opening bracket, trimmed, non-empty, first occurrence order."""

import re

from common import read_json, write_golden


def placeholders(body):
    out = []
    for m in re.finditer(r"\[([^\[\]]*)\]", body):
        name = m.group(1).strip()
        if name and name not in out:
            out.append(name)
    return out


def main():
    script = read_json("seeds", "script.json")
    out = {}
    for e in script["entries"]:
        tag = e["match"].get("tag") or ""
        if tag.startswith("seed/") and tag.count("/") == 1:
            out["seed-%02d" % int(tag.split("/")[1])] = placeholders(e["response"])
    write_golden("seed_placeholders.json", out)


if __name__ == "__main__":
    main()
