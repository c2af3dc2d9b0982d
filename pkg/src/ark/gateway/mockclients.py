"""Deterministic pipeline-aware mock text generator.

Dispatches on which prompt template produced the input and answers with a
pure function of the prompt, so a full mock-mode session is reproducible
byte-for-byte.
"""

from __future__ import annotations

import hashlib
import re

from ..retrieval import extract_noun_phrases


def _stable_int(text: str, mod: int) -> int:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little") % mod


class PipelineMockTextGenerator:
    """Covers all three prompt kinds: QA generation, sentence rewrite, and
    scene generation/editing."""

    identity = "pipeline-mock-textgen"

    def generate(self, prompt: str) -> str:
        if "Generate question and answer relevant" in prompt:
            return self._qa(prompt)
        if prompt.endswith("New Sentence:"):
            return self._rewrite(prompt)
        if prompt.startswith("You are a 3D scene composer"):
            return self._scene(prompt)
        if prompt.startswith("You are a 3D scene editor"):
            return self._edit(prompt)
        return prompt

    def _qa(self, prompt: str) -> str:
        m = re.search(r"Knowledge: (.*?)\. Generate question", prompt, re.S)
        knowledge = m.group(1) if m else "thing"
        subject = knowledge.split()[0] if knowledge.split() else "thing"
        return f"Q: What is the {subject} in the image? A: {knowledge}."

    def _rewrite(self, prompt: str) -> str:
        sentence = re.search(r"Original Sentence: (.*?) Question:", prompt, re.S)
        answer = re.search(r"Answer: (.*?)  New Sentence:", prompt, re.S)
        s = sentence.group(1).rstrip(".") if sentence else ""
        a = answer.group(1).rstrip(".") if answer else ""
        return f"{s}, where {a}."

    def _scene(self, prompt: str) -> str:
        m = re.search(r"Text: (.*)\Z", prompt, re.S)
        text = m.group(1).strip() if m else ""
        phrases = extract_noun_phrases(text) or ["object"]
        seen: list[str] = []
        lines = []
        for phrase in phrases:
            if phrase in seen:
                continue
            seen.append(phrase)
            x = float(2 * (len(seen) - 1))
            z = float(_stable_int(phrase, 5))
            lines.append(f"OBJECT {phrase} POS {x} 0.0 {z} ROT 0 0 0 SCALE 1 1 1")
        return "\n".join(lines)

    def _edit(self, prompt: str) -> str:
        m = re.search(r"Instruction: (.*)\Z", prompt, re.S)
        instruction = m.group(1).strip() if m else ""
        lowered = instruction.lower()
        words = lowered.split()

        def target_after(verb: str) -> str:
            # Chunk only the text after the verb, so polite framing like
            # "please add ..." cannot become the target.
            tail = lowered.split(verb, 1)[1]
            phrases = extract_noun_phrases(tail)
            return phrases[0] if phrases else "object"

        if "add" in words:
            target = target_after("add")
            x = float(_stable_int(target, 7))
            z = float(_stable_int(target + "/z", 7))
            return f"ADD {target} POS {x} 0.0 {z}"
        if "remove" in words or "delete" in words:
            return f"REMOVE {target_after('remove' if 'remove' in words else 'delete')}"
        m2 = re.search(r"move (.*?) to \(?(-?[\d.]+)[, ]+(-?[\d.]+)[, ]+(-?[\d.]+)\)?", lowered)
        if m2:
            phrases = extract_noun_phrases(m2.group(1))
            target = phrases[0] if phrases else "object"
            return f"MOVE {target} POS {m2.group(2)} {m2.group(3)} {m2.group(4)}"
        return ""
