# Copyright 2026 The dopf Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Distributed AC optimal power flow with worst-case bound tightening."""

from ._dopf import (
    DopfError,
    Experiment,
    load_experiment,
    median,
    percentile,
    run_admm,
    solve_opf,
    sweep_tolerance,
    tighten,
    update_lambda,
    worst_case,
)

__all__ = [
    "DopfError",
    "Experiment",
    "load_experiment",
    "median",
    "percentile",
    "run_admm",
    "solve_opf",
    "sweep_tolerance",
    "tighten",
    "update_lambda",
    "worst_case",
]
