"""cvguard: a deterministic V2I intersection simulator under flooding attack,
with a rule-based detection and sampling-based prevention engine."""

from .attacker import attacker_bsm, attacker_ids, flood_packets
from .channel import (WindowOutcome, attacker_packet_rate, deliver,
                      derive_capacity, effective_capacity_pps, min_attackers)
from .controller import Controller, MitigationFacts, MitigationParams
from .kinematics import (ConflictEvent, WorldState, build_world,
                         detect_conflicts, step)
from .microbox import (AttackReport, MicroBox, MitigationFilter, SenderContext,
                       Violation, WorldFacts, classify_attack,
                       compute_t_interval, evaluate_rules)
from .model import (AttackConfig, Bsm, ChannelConfig, ConfigViolation,
                    CvguardConfig, PolicySet, RoadGeometry, Role, RsuConfig,
                    Rule, RuleKind, ScenarioConfig, ScenarioValidationError,
                    Segment, SsgaConfig, StarvationMode, VehicleState,
                    VehiclesConfig, bsm_from_vehicle, build_policy, config_hash,
                    load_scenario, scenario_from_dict, scenario_to_dict,
                    scenario_violations, validate_scenario)
from .runner import (RunResult, derive_seeds, feasibility_report, run, sweep,
                     write_result)
from .ssga import (Advisory, SsgaView, TrackedVehicle, Verdict, app_drr,
                   compute_advisory, update_view)

__version__ = "0.1.0"
