//! Config-driven experiment runner for the `qrobust` command.
//!
//! Run directory layout (`<out>/<run-id>/`):
//!
//! | file | written by |
//! |---|---|
//! | `config.toml` | `train` (resolved config echo) |
//! | `checkpoint.json` | `train` |
//! | `history.csv` | `train` |
//! | `metrics.csv` | `train` |
//! | `sweep_<attack>.csv`, `summary.csv` | `attack` |
//! | `search.csv`, `search_refined.csv`, `search_topk.json` | `search` |
//! | `report.json` | `report` |
//! | `dataset.csv` | `synth` |

pub mod cli;
pub mod commands;
pub mod config;
pub mod report;
