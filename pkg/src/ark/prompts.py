"""Prompt templates for the generative backends.

The QA-augmentation and sentence-rewrite templates are fixed contracts and
golden-tested byte-for-byte; the scene-generation prompt is owned by this
package (versioned under templates/) and instructs the model to emit the
scene DSL.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional

TEMPLATE_VERSION = "v1"


class PromptError(Exception):
    pass


class MissingSlot(PromptError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    template: str
    required_slots: frozenset[str]

    def __post_init__(self):
        for slot in self.required_slots:
            if self.template.count("{" + slot + "}") != 1:
                raise PromptError(f"template {self.name}: slot {slot!r} must appear exactly once")

    def render(self, **slots: str) -> str:
        for slot in self.required_slots:
            value = slots.get(slot)
            if value is None or value == "":
                raise MissingSlot(f"template {self.name}: slot {slot!r} is unbound or empty")
        out = self.template
        for slot in self.required_slots:
            out = out.replace("{" + slot + "}", slots[slot])
        if re.search(r"\{[a-z_]+\}", out):
            raise PromptError(f"template {self.name}: unresolved slot in rendered output")
        return out


def _load_template(name: str, slots: set[str]) -> PromptTemplate:
    text = (
        resources.files("ark.templates")
        .joinpath(f"{TEMPLATE_VERSION}/{name}.txt")
        .read_text(encoding="utf-8")
    )
    # Template files end with a newline for editor hygiene; the prompt does not.
    if text.endswith("\n"):
        text = text[:-1]
    return PromptTemplate(name, text, frozenset(slots))


QA_TEMPLATE = _load_template("qa_prompt", {"sentence", "knowledge"})
REWRITE_TEMPLATE = _load_template("rewrite_prompt", {"sentence", "question", "answer"})
SCENE_TEMPLATE = _load_template("scene_prompt", {"text"})
SCENE_EDIT_TEMPLATE = _load_template("scene_edit_prompt", {"text", "scene"})


def render_qa_prompt(sentence: str, knowledge: str) -> str:
    """Prompt asking the text generator for a QA pair grounded in one
    knowledge statement."""
    return QA_TEMPLATE.render(sentence=sentence, knowledge=knowledge)


def render_rewrite_prompt(sentence: str, question: str, answer: str) -> str:
    """Prompt asking the text generator to rewrite the sentence using the QA
    pair; always ends with "New Sentence:"."""
    return REWRITE_TEMPLATE.render(sentence=sentence, question=question, answer=answer)


def render_scene_prompt(enhanced_text: str, scene_context: Optional[str] = None) -> str:
    """Scene generation (no context) or editing (serialized scene embedded)
    prompt. States the DSL grammar so model output stays parseable."""
    if not enhanced_text:
        raise MissingSlot("scene prompt: enhanced_text is empty")
    if scene_context is None:
        return SCENE_TEMPLATE.render(text=enhanced_text)
    return SCENE_EDIT_TEMPLATE.render(text=enhanced_text, scene=scene_context)
