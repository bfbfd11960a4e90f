"""Energy-minimal DVFS scheduling of periodic real-time tasks on multiprocessors."""

from .bundled import bundled_processor, bundled_taskset, bundled_tasksets, taskset_names
from .formulations import (ALGORITHMS, DISCRETE_ALGORITHMS, GP_NODVFS, GP_SDISCRETE, GP_SVFS,
                           LP_DVFS, NLP_DVFS, InfeasibleError, StaticAllocation, WorkloadPlan,
                           consolidate, solve, solve_gp_nodvfs, solve_gp_sdiscrete,
                           solve_gp_svfs, solve_lp_dvfs, solve_nlp_dvfs, speed_grid)
from .lp import LpProblem, LpSolution, certify, solve_lp
from .power import (EnergyReport, PowerModel, PowerSample, ProcessorSpec, critical_speed,
                    fit_power_model, load_processor, mape, total_energy)
from .schedule import (Schedule, Segment, gantt_csv, load_schedule, dump_schedule,
                       mcnaughton_interval, minlp_point, realize, validate)
from .taskmodel import (Job, Task, Taskset, expand_jobs, feasibility_check, hyperperiod,
                        load_taskset, make_taskset, taskset_density)
from .timegrid import TimeGrid, build_major_grid, job_windows

__version__ = "0.1.0"
