#!/usr/bin/env python3
"""Regenerate include/vps/prompts.hpp from data/prompts/*.txt."""
import pathlib

root = pathlib.Path(__file__).resolve().parent.parent
names = ["reasoning", "relevance", "completeness", "clarity", "fluency"]
out = [
    "#pragma once",
    "",
    "// Generated by tools/embed_prompts.py from data/prompts/*.txt; do not edit.",
    "",
    "#include <string_view>",
    "",
    "namespace vps::prompts {",
    "",
]
for n in names:
    text = (root / "data" / "prompts" / f"{n}.txt").read_text()
    assert ')PROMPT"' not in text
    out.append(f'inline constexpr std::string_view k{n.capitalize()} = R"PROMPT({text})PROMPT";')
    out.append("")
out.append("}  // namespace vps::prompts")
(root / "include" / "vps" / "prompts.hpp").write_text("\n".join(out) + "\n")
