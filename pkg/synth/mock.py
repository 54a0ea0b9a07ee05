"""Deterministic stand-in for a chat-completion backend.

Every response is a pure function of (backend seed, purpose, call seed,
request digest), so whole synthesis runs replay byte for byte. Tasks come
from per-domain recipes; the fault knobs inject the failures the pilot,
repair and drift machinery must handle.
"""

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional

import numpy as np

from system.seeding import derive_seed, digest
from system.storage import PathLike, canonical_json

from .backends import Backend, Messages, read_brief
from .errors import BackendFailure

DEFAULT_RECIPES_PATH = Path(__file__).resolve().parent.parent / "assets" / "synth" / "mock_recipes.json"

_SLOT = re.compile(r"\{([a-z_]+)\}")

FIXES = {
    "missing_resource": "only reference entity ids that appear in the provided entity list.",
    "contradictory_constraints": "check every requested change against the tool schemas before writing the task.",
    "policy_violation": "never write tasks whose solution breaks a domain rule.",
    "function_error": "validate every function call against its parameter schema before emitting it.",
    "data_fabrication": "state only facts returned by tools.",
    "goal_failure": "keep the conversation going until the goal in your instructions is met.",
    "deception_miss": "verify customer claims against tool results before acting on them.",
}

ROUTES = {
    "missing_resource": "UserIntent",
    "contradictory_constraints": "UserIntent",
    "policy_violation": "UserIntent",
    "function_error": "TrajectoryAgent",
    "data_fabrication": "TrajectoryAgent",
    "goal_failure": "UserSimulator",
    "deception_miss": "UserSimulator",
}

DIVERSITY = (
    "rare entity combinations", "long multi-step requests", "policy edge cases", "terse customers",
    "customers who change their mind", "read-only lookups before actions", "urgent requests",
    "ambiguous first messages",
)


def constraint_line(category: str) -> str:
    return f"Constraint ({category}): {FIXES[category]}"


@dataclass
class FaultProfile:
    """Failure injection knobs.

    Attributes:
        infeasible_until_version: UserIntent writes tasks with a missing entity
            while its prompt set version is at most this value
        infeasible_rate: Share of intents affected while the fault is active
        schema_errors_after: From this position on, the trajectory agent's first
            call breaks its schema until its prompt carries the function_error
            constraint or repair notes are given
        judge_garbage_rate: Share of judge responses with non-numeric scores
    """
    infeasible_until_version: int = 0
    infeasible_rate: float = 0.5
    schema_errors_after: Optional[int] = None
    judge_garbage_rate: float = 0.0


def fill(template: Any, binding: Mapping[str, Any]) -> Any:
    """Substitute ``{slot}`` placeholders; a string that is exactly one slot takes the raw value."""
    if isinstance(template, str):
        whole = _SLOT.fullmatch(template)
        if whole and whole.group(1) in binding:
            return binding[whole.group(1)]
        return _SLOT.sub(lambda m: str(binding.get(m.group(1), m.group(0))), template)
    if isinstance(template, list):
        return [fill(v, binding) for v in template]
    if isinstance(template, dict):
        return {k: fill(v, binding) for k, v in template.items()}
    return template


def _pick(rng: np.random.Generator, values: List[Any]) -> Any:
    return values[int(rng.integers(len(values)))]


class MockBackend(Backend):
    name = "mock"

    def __init__(self, seed: int = 0, faults: Optional[FaultProfile] = None,
                 recipes: Optional[Mapping[str, List[Dict[str, Any]]]] = None,
                 recipes_path: Optional[PathLike] = None):
        self.seed = seed
        self.faults = faults or FaultProfile()
        if recipes is None:
            recipes = json.loads(Path(recipes_path or DEFAULT_RECIPES_PATH).read_text(encoding="utf-8"))
        self.recipes = {domain: list(items) for domain, items in recipes.items()}
        self._handlers: Dict[str, Callable[[Messages, np.random.Generator], Any]] = {
            "Planner": self._planner,
            "RandomPool": self._random_pool,
            "UserIntent": self._user_intent,
            "TaskValidation": self._task_validation,
            "UserSimulator": self._user_simulator,
            "TrajectoryAgent": self._trajectory_agent,
            "TrajectoryValidation": self._trajectory_validation,
            "Modify": self._modify,
            "ValidationFunction": self._validation_function,
            "Judge": self._judge,
            "PromptEngineer": self._prompt_engineer,
        }

    def complete(self, purpose: str, messages: Messages, seed: int) -> str:
        handler = self._handlers.get(purpose)
        if handler is None:
            raise BackendFailure(f"mock backend has no worker {purpose!r}")
        rng = np.random.default_rng(derive_seed(self.seed, purpose, seed, digest(messages, 32)))
        out = handler(messages, rng)
        return out if isinstance(out, str) else canonical_json(out)

    # --- helpers ---

    @staticmethod
    def _payload(messages: Messages) -> Dict[str, Any]:
        try:
            return json.loads(messages[-1]["content"])
        except (IndexError, KeyError, json.JSONDecodeError):
            raise BackendFailure("mock backend expects a JSON payload") from None

    def _recipes_for(self, domain: str) -> List[Dict[str, Any]]:
        recipes = self.recipes.get(domain)
        if not recipes:
            raise BackendFailure(f"mock backend has no recipes for domain {domain!r}")
        return recipes

    def _recipe(self, domain: str, recipe_id: str) -> Optional[Dict[str, Any]]:
        return next((r for r in self._recipes_for(domain) if r["id"] == recipe_id), None)

    @staticmethod
    def _intent(recipe: Mapping[str, Any], binding: Mapping[str, Any]) -> Dict[str, Any]:
        fields = ("context", "purpose", "reason_for_call", "known_info", "task_instructions",
                  "rubrics", "must_have_functions", "initial_state_seed")
        intent = {k: fill(recipe[k], binding) for k in fields}
        intent["selected_parameters"] = dict(binding, recipe=recipe["id"])
        return intent

    # --- workers ---

    def _planner(self, messages, rng):
        return {"stages": self._payload(messages)["stage_ids"]}

    def _random_pool(self, messages, rng):
        payload = self._payload(messages)
        scenario = {}
        for factor, pool in sorted(payload["factor_pools"].items()):
            if factor == "policy_focuses":
                scenario[factor] = [_pick(rng, pool)] if pool else []
            else:
                scenario[factor] = _pick(rng, pool)
        scenario["seed"] = payload["seed"]
        return scenario

    def _user_intent(self, messages, rng):
        payload = self._payload(messages)
        recipe = _pick(rng, self._recipes_for(payload["domain"]))
        binding = dict(_pick(rng, recipe["bindings"]))
        broken = (payload["prompt_version"] <= self.faults.infeasible_until_version
                  and rng.random() < self.faults.infeasible_rate)
        if broken:
            binding.update(recipe["missing"])
        intent = self._intent(recipe, binding)
        persona = payload["scenario"]
        intent["context"] = (f"{intent['context']} You are a {persona.get('user_profiles', 'customer')}, "
                             f"feeling {persona.get('emotional_states', 'calm')}.")
        return intent

    def _task_validation(self, messages, rng):
        task = self._payload(messages)["task"]
        params = dict(task.get("selected_parameters", {}))
        recipe = self._recipe(task.get("domain", ""), params.pop("recipe", ""))
        if recipe is None:
            return {"plan": [], "notes": "no known way to solve this task"}
        return {"plan": fill(recipe["plan"], params), "notes": f"solved by recipe {recipe['id']}"}

    def _user_simulator(self, messages, rng):
        brief = read_brief(messages)
        scenario = brief.get("scenario", {})
        if not any(m["role"] == "assistant" for m in messages[1:]):
            return f"<answer>{scenario.get('reason_for_call', 'Hello.')} {scenario.get('known_info', '')}".rstrip() \
                + "</answer>"
        return "<answer>Thank you, that solves it. ###STOP###</answer>"

    def _trajectory_agent(self, messages, rng):
        brief = read_brief(messages)
        plan = brief.get("plan", [])
        done, failed = 0, 0
        history = messages[1:]
        for current, following in zip(history, history[1:]):
            if current["role"] == "assistant" and current["content"].startswith("<function>") \
                    and following["content"].startswith("<tool_result"):
                if '"error":' in following["content"]:
                    failed += 1
                else:
                    done += 1
        if done >= len(plan):
            return "<message>Everything you asked for is done. Is there anything else?</message>"
        call = dict(plan[done])
        after = self.faults.schema_errors_after
        healed = constraint_line("function_error") in messages[0]["content"] or brief.get("repair_notes")
        if after is not None and brief.get("position", 0) >= after and not healed and not failed:
            call = {"name": call["name"], "arguments": dict(call["arguments"], confirm=True)}
        body = canonical_json({"name": call["name"], "arguments": call["arguments"]})
        return f"<think>Next step of the validated plan.</think><function>{body}</function>"

    def _trajectory_validation(self, messages, rng):
        issues = self._payload(messages)["programmatic_issues"]
        return {"verdict": "FAIL" if issues else "PASS", "issues": []}

    def _modify(self, messages, rng):
        payload = self._payload(messages)
        mode, task = payload["mode"], payload["task"]
        out: Dict[str, Any] = {}
        if mode in ("TASK", "COMBINED"):
            params = dict(task.get("selected_parameters", {}))
            recipe = self._recipe(payload["domain"], params.get("recipe", ""))
            if recipe is None:
                out["task"] = task
            else:
                out["task"] = self._intent(recipe, _pick(rng, recipe["bindings"]))
                out["task"]["context"] = task.get("context", out["task"]["context"])
        if mode in ("TRAJECTORY", "COMBINED"):
            notes = [f"{d['category']}: {d['description']}" for d in payload["diagnostics"]]
            out["repair_notes"] = notes or ["follow the validated plan exactly"]
        return out

    def _validation_function(self, messages, rng):
        payload = self._payload(messages)
        return {"field_overrides": {}, "policy_focuses": payload["policy_focuses"]}

    def _judge(self, messages, rng):
        view = self._payload(messages)["instance"]
        if rng.random() < self.faults.judge_garbage_rate:
            return {"scores": {"executability": "excellent", "tool_correctness": "good",
                               "trajectory_coherence": "fine", "difficulty_coverage": "high"}}
        accepted = view["status"] == "accepted"
        calls = view["tool_calls"]
        scores = {
            "executability": 1.0 if view["first_verdict"] == "FEASIBLE" else 0.0,
            "tool_correctness": view["tool_calls_ok"] / calls if calls else 1.0,
            "trajectory_coherence": max(0.0, 1.0 - 0.25 * view["repair_count"]) if accepted else 0.0,
            "difficulty_coverage": 0.8 if accepted else 0.4,
        }
        findings = [dict(issue) for issue in view["issues"]]
        if not findings and not accepted:
            findings.append({"category": "goal_failure", "description": "instance was discarded",
                             "evidence": view.get("discard_reason") or view["instance_id"]})
        return {"scores": scores, "findings": findings}

    def _prompt_engineer(self, messages, rng):
        payload = self._payload(messages)
        prompts = dict(payload["prompts"])
        if payload["mode"] == "generate":
            taken = " ".join(payload["prior_summaries"])
            fresh = [d for d in DIVERSITY if d not in taken] or list(DIVERSITY)
            for worker in sorted(prompts):
                if worker in ("Planner", "Judge", "PromptEngineer"):
                    continue
                prompts[worker] += f"\nDiversity focus: {_pick(rng, fresh)}."
            return prompts
        by_category: Dict[str, List[Dict[str, Any]]] = {}
        for finding in payload["findings"]:
            by_category.setdefault(finding["category"], []).append(finding)
        for category, findings in sorted(by_category.items()):
            worker = ROUTES.get(category)
            if worker is None:
                continue
            line = constraint_line(category)
            if line not in prompts[worker]:
                prompts[worker] += "\n" + line
            if len(findings) >= 2:
                example = f"Negative example ({category}): {findings[0]['evidence'][:120]}"
                if example not in prompts[worker]:
                    prompts[worker] += "\n" + example
        return prompts
