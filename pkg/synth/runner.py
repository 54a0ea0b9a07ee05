"""Three-phase synthesis: initialize prompt sets, pilot them, generate at scale."""

from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional

from arena.environment import Environment
from system.config import SynthConfig
from system.logs import get_logger, kv
from system.seeding import derive_seed
from system.storage import PathLike
from system.workers import WorkerPool

from .archive import write_archive
from .backends import Backend
from .errors import DriftUnrecoverable
from .pilot import PilotResult, StopCriteria, run_pilot
from .plan import WorkflowPlan, plan_workflow
from .prompts import PromptSet, generate_prompt_set, load_default_prompts
from .scale import ScaleResult, run_scale
from .workflow import Workflow

logger = get_logger(__name__)

DEFAULT_REQUEST = "Multi-turn customer-service dialogues with executable checkers."


@dataclass
class SynthesisResult:
    domain: str
    backend: str
    config: SynthConfig
    plan: WorkflowPlan
    initial_sets: List[PromptSet]
    pilots: List[PilotResult]
    scale: ScaleResult

    @property
    def instances(self):
        return self.scale.instances

    def prompt_versions(self) -> List[PromptSet]:
        """Every version of every set, pilot and drift re-pilots included."""
        versions: Dict[Any, PromptSet] = {}
        for pilot in self.pilots:
            for ps in pilot.versions:
                versions[(ps.set_id, ps.version)] = ps
        for out in self.scale.sets:
            for ps in out.versions:
                versions[(ps.set_id, ps.version)] = ps
        return [versions[key] for key in sorted(versions)]

    def manifest(self) -> Dict[str, Any]:
        converged = {p.prompt_set.set_id: p for p in self.pilots}
        scaled = {out.set_id: out for out in self.scale.sets}
        sets = []
        for initial in self.initial_sets:
            pilot = converged[initial.set_id]
            out = scaled.get(initial.set_id)
            sets.append({
                "set_id": initial.set_id,
                "summary": initial.summary(),
                "pilot_converged": pilot.converged,
                "pilot_history": [m.to_dict() for m in pilot.history],
                "final_version": out.prompt_set.version if out else pilot.prompt_set.version,
                "lineage": (out.prompt_set if out else pilot.prompt_set).lineage,
                "accepted": len(out.accepted) if out else 0,
                "discarded": out.discarded if out else 0,
                "drift_pauses": out.pauses if out else 0,
            })
        return {
            "domain": self.domain,
            "backend": self.backend,
            "config": asdict(self.config),
            "plan": self.plan.to_dict(),
            "prompt_sets": sets,
            "counts": {"accepted": len(self.instances), "audited": len(self.scale.audit_log),
                       "discarded": sum(out.discarded for out in self.scale.sets)},
            "instances": [inst.instance_id for inst in self.instances],
        }

    def save(self, directory: PathLike):
        return write_archive(directory, self.manifest(), self.instances, self.scale.audit_log,
                             self.prompt_versions())


def run_synthesis(env: Environment, backend: Backend, config: SynthConfig, request: str = DEFAULT_REQUEST,
                  pool: Optional[WorkerPool] = None, progress: bool = False) -> SynthesisResult:
    """Plan the workflow, initialize K prompt sets, pilot each, then generate ``n_target`` instances.

    Prompt sets are piloted and scaled in parallel on ``pool``; sets whose
    pilot does not converge are left out of scaled generation.

    Raises:
        InvalidPlan: the planner's workflow is not admissible
        DriftUnrecoverable: no set converged, or a drifting set failed to reconverge
        BackendFailure: the backend produced nothing
    """
    seed = config.seed
    defaults = load_default_prompts()
    plan = plan_workflow(request, env.domain, {"n_target": config.n_target, "k_sets": config.k_sets},
                         backend, defaults["Planner"], derive_seed(seed, "plan"))
    workflow = Workflow(env, backend, plan, config.max_turns)

    initial: List[PromptSet] = []
    for k in range(config.k_sets):
        prompt_set = generate_prompt_set(plan, [ps.summary() for ps in initial], k, backend,
                                         derive_seed(seed, "init", k), defaults)
        initial.append(prompt_set)
    logger.info("initialized prompt sets %s", kv(k=len(initial), domain=env.domain.name))

    criteria = StopCriteria.from_config(config)
    runner = pool or WorkerPool(1)
    pilots = runner.map(lambda ps: run_pilot(workflow, ps, config.pilot_batch_size, criteria,
                                             derive_seed(seed, "pilot"), config.max_pilot_iterations),
                        initial)
    ready = [p for p in pilots if p.converged]
    for pilot in pilots:
        if not pilot.converged:
            logger.warning("prompt set %s left out of scaled generation, pilot did not converge",
                           pilot.prompt_set.set_id)
    if not ready:
        raise DriftUnrecoverable("all", "no prompt set converged in the pilot phase")

    scale = run_scale(workflow, ready, config.n_target, config, derive_seed(seed, "scale"),
                      pool=runner, progress=progress)
    logger.info("synthesis finished %s", kv(accepted=len(scale.instances), audited=len(scale.audit_log)))
    return SynthesisResult(env.domain.name, backend.name, config, plan, initial, list(pilots), scale)
