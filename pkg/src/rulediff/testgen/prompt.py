"""Prompt construction for rule test generation."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..rules import Rule

SYSTEM_PROMPT = """\
You write test data for a medical validation rule engine. Rules have the form
"<condition> implies <requirement>". Work through these steps:
Step 1: Be exact. Use only the variables that occur in the rule, and give every value the type the rule compares it with.
Step 2: Identify the variables of the rule and build three test cases:
  satisfying_case - the condition holds and the requirement holds;
  violating_case - the condition holds and the requirement does not hold;
  invalid_case - the condition does not hold.
Step 3: Do not repeat yourself: give exactly one case of each kind.
Step 4: Rate your confidence in the three cases as confidence_score, a number between 0 and 1.
Step 5: Answer with one JSON object only, with the keys satisfying_case, violating_case, invalid_case and confidence_score. Each case maps variable names to values; write dates as "YYYY-MM-DD"."""

USER_PREFIX = "Generate the three test cases for this rule:\n```\n"
USER_SUFFIX = "\n```"

_RULE_IN_USER = re.compile(re.escape(USER_PREFIX) + r"(.*)" + re.escape(USER_SUFFIX) + r"\Z", re.DOTALL)


@dataclass(frozen=True)
class Prompt:
    system: str
    user: str
    combined: bool = False
    rule_key: str = ""

    @property
    def text(self) -> str:
        """Single-message form for providers without a system role."""
        return f"{self.system}\n\n{self.user}"

    def messages(self) -> list[dict[str, str]]:
        if self.combined:
            return [{"role": "user", "content": self.text}]
        return [{"role": "system", "content": self.system}, {"role": "user", "content": self.user}]


def build_prompt(rule: Rule, combined: bool = False) -> Prompt:
    # concatenation, not str.format: braces in rule text must survive verbatim
    user = USER_PREFIX + rule.text + USER_SUFFIX
    return Prompt(SYSTEM_PROMPT, user, combined, rule.key)


def rule_text_from(prompt: Prompt) -> str:
    m = _RULE_IN_USER.search(prompt.user)
    if not m:
        raise ValueError("prompt does not carry a rule")
    return m.group(1)
