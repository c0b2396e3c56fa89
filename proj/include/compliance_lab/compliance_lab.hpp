#pragma once

#include "compliance_lab/cli.hpp"
#include "compliance_lab/config.hpp"
#include "compliance_lab/core_model.hpp"
#include "compliance_lab/csv_io.hpp"
#include "compliance_lab/montecarlo.hpp"
#include "compliance_lab/policy_ledger.hpp"
#include "compliance_lab/reference_dynamics.hpp"
#include "compliance_lab/replay.hpp"
#include "compliance_lab/rng.hpp"
#include "compliance_lab/scenarios.hpp"
#include "compliance_lab/stats.hpp"
