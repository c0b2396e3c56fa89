#pragma once

// Ledger replay: rebuild the control trajectory from the public transaction
// log alone, and audit a ledger file against the run that claims to have
// produced it.
//
// Compliance inference per policy:
//   AdaptivePenalty  every draw settles the previous stake, so Return at
//                    step k means M_i(k)=1 and Forfeit means M_i(k)=0; the
//                    log determines every draw and the replay is complete.
//   EventDriven      Forfeit at step k means M_i(k)=0; silent steps are
//                    assumed compliant and the result is flagged partial.
//   FixedPenalty     only contract boundaries reveal anything; all draws are
//                    assumed compliant and the result is flagged partial.
//
// The replay applies the controller updates in the exact order the simulator
// uses (shared helper functions, agents in ascending id order), so a complete
// reconstruction reproduces C(k) and c_i(k) bit-for-bit.

#include <cstdint>
#include <string>
#include <vector>

#include "compliance_lab/config.hpp"
#include "compliance_lab/core_model.hpp"
#include "compliance_lab/montecarlo.hpp"
#include "compliance_lab/policy_ledger.hpp"

namespace clab {

struct ReconstructedSignals {
    bool complete = true;
    std::vector<std::vector<std::uint8_t>> draws;  // [k][i], row 0 = initial draws (zeros)
    std::vector<double> c_global;                  // [k]
    std::vector<std::vector<double>> c_by_agent;   // [k][i]
};

inline ReconstructedSignals reconstruct_signals(const Ledger& ledger, const SimConfig& cfg) {
    validate_config(cfg);
    const int n = cfg.n;
    const long horizon = cfg.horizon;
    const ControlConfig ctl = cfg.effective_control();

    ReconstructedSignals rec;
    rec.draws.assign(static_cast<std::size_t>(horizon) + 1,
                     std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));

    switch (cfg.policy) {
        case PolicyKind::AdaptivePenalty: {
            // Every (step, agent) in [1, horizon] must settle exactly once.
            std::vector<std::uint8_t> seen(static_cast<std::size_t>(horizon + 1) *
                                               static_cast<std::size_t>(n),
                                           0);
            for (const LedgerTransaction& tx : ledger.log()) {
                if (tx.kind == TxKind::Deposit) continue;
                if (tx.step < 1 || tx.step > horizon || tx.agent_id < 0 || tx.agent_id >= n) {
                    rec.complete = false;
                    continue;
                }
                const std::size_t idx = static_cast<std::size_t>(tx.step) *
                                            static_cast<std::size_t>(n) +
                                        static_cast<std::size_t>(tx.agent_id);
                if (seen[idx]) rec.complete = false;
                seen[idx] = 1;
                rec.draws[static_cast<std::size_t>(tx.step)][static_cast<std::size_t>(
                    tx.agent_id)] = tx.kind == TxKind::Return ? 1 : 0;
            }
            for (long k = 1; k <= horizon; ++k)
                for (int i = 0; i < n; ++i)
                    if (!seen[static_cast<std::size_t>(k) * static_cast<std::size_t>(n) +
                              static_cast<std::size_t>(i)])
                        rec.complete = false;
            break;
        }
        case PolicyKind::EventDriven: {
            rec.complete = false;  // silent compliance is not observable
            for (auto& row : rec.draws) std::fill(row.begin(), row.end(), std::uint8_t{1});
            std::fill(rec.draws[0].begin(), rec.draws[0].end(), std::uint8_t{0});
            for (const LedgerTransaction& tx : ledger.log())
                if (tx.kind == TxKind::Forfeit && tx.step >= 1 && tx.step <= horizon &&
                    tx.agent_id >= 0 && tx.agent_id < n)
                    rec.draws[static_cast<std::size_t>(tx.step)]
                             [static_cast<std::size_t>(tx.agent_id)] = 0;
            break;
        }
        case PolicyKind::FixedPenalty: {
            rec.complete = false;  // per-step compliance is not observable
            for (std::size_t k = 1; k < rec.draws.size(); ++k)
                std::fill(rec.draws[k].begin(), rec.draws[k].end(), std::uint8_t{1});
            break;
        }
    }

    // Replay the controller with the inferred draws, mirroring step_ensemble.
    std::vector<AgentState> states(static_cast<std::size_t>(n));
    for (AgentState& s : states) s = {cfg.init_c_individual, cfg.mbar_init, 0, false};
    double c_global = cfg.init_c_global;

    rec.c_global.reserve(static_cast<std::size_t>(horizon) + 1);
    rec.c_by_agent.reserve(static_cast<std::size_t>(horizon) + 1);
    auto record = [&]() {
        rec.c_global.push_back(c_global);
        std::vector<double> row(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) row[static_cast<std::size_t>(i)] = states[static_cast<std::size_t>(i)].c;
        rec.c_by_agent.push_back(std::move(row));
    };
    record();

    for (long k = 0; k < horizon; ++k) {
        const double new_c_global =
            ctl.enable_global ? global_update(c_global, mean_last_m(states), ctl.alpha, ctl.q_star)
                              : c_global;
        const auto& draw_row = rec.draws[static_cast<std::size_t>(k) + 1];
        for (int i = 0; i < n; ++i) {
            AgentState& s = states[static_cast<std::size_t>(i)];
            const double new_c =
                ctl.enable_individual ? individual_update(s.c, s.m_bar, ctl.beta, ctl.q_star)
                                      : s.c;
            const int m = draw_row[static_cast<std::size_t>(i)];
            s.m_bar = ema_update(s.m_bar, m, ctl.gamma);
            s.last_m = m;
            s.c = new_c;
        }
        c_global = new_c_global;
        record();
    }
    return rec;
}

struct AuditReport {
    bool conservation_ok = false;
    bool complete = false;        // per-step compliance inferable from the log
    bool signals_match = false;   // replayed C, c_i equal the re-simulated series bit-for-bit
    bool amounts_match = false;   // every amount matches the replayed price/stake
    std::string detail;

    // Partial audits (policies that hide per-step compliance) only assert
    // conservation and stake consistency.
    bool ok() const {
        return conservation_ok && (complete ? signals_match && amounts_match : true);
    }
};

// Checks that every Deposit is priced from the replayed signals at its step
// and every settlement moves the full outstanding stake.
inline bool check_amounts(const Ledger& ledger, const SimConfig& cfg,
                          const ReconstructedSignals& rec, std::string& detail) {
    std::vector<std::uint64_t> stakes(static_cast<std::size_t>(cfg.n), 0);
    for (const LedgerTransaction& tx : ledger.log()) {
        if (tx.step < 0 || tx.step > cfg.horizon || tx.agent_id < 0 || tx.agent_id >= cfg.n) {
            detail = "transaction outside run bounds";
            return false;
        }
        auto& stake = stakes[static_cast<std::size_t>(tx.agent_id)];
        if (tx.kind == TxKind::Deposit) {
            const TokenAmount expect = bond_price(
                rec.c_global[static_cast<std::size_t>(tx.step)],
                rec.c_by_agent[static_cast<std::size_t>(tx.step)][static_cast<std::size_t>(tx.agent_id)],
                cfg.unit_scale);
            if (expect != tx.amount) {
                detail = "deposit at step " + std::to_string(tx.step) + " for agent " +
                         std::to_string(tx.agent_id) + " has amount " +
                         std::to_string(tx.amount.micro_tokens) + ", expected " +
                         std::to_string(expect.micro_tokens);
                return false;
            }
            stake += tx.amount.micro_tokens;
        } else {
            if (tx.amount.micro_tokens != stake) {
                detail = "settlement at step " + std::to_string(tx.step) + " for agent " +
                         std::to_string(tx.agent_id) + " moves " +
                         std::to_string(tx.amount.micro_tokens) + ", outstanding stake is " +
                         std::to_string(stake);
                return false;
            }
            stake = 0;
        }
    }
    return true;
}

// Full audit: conservation, signal replay against a fresh simulation of
// rep 0, and amount verification.
inline AuditReport audit_ledger(const Ledger& ledger, const SimConfig& cfg) {
    AuditReport report;
    report.conservation_ok = verify_conservation(ledger);
    if (!report.conservation_ok) report.detail = "conservation identity violated";

    const ReconstructedSignals rec = reconstruct_signals(ledger, cfg);
    report.complete = rec.complete;

    if (rec.complete) {
        RunConfig rc;
        rc.sim = cfg;
        rc.seed = rng::mix_seed(cfg.base_seed, 0);  // the recorded rep
        rc.capture_full_c = true;
        const RunResult rr = run_single(rc);
        report.signals_match =
            rec.c_global == rr.c_global && rec.c_by_agent == rr.c_by_agent;
        if (!report.signals_match && report.detail.empty())
            report.detail = "replayed signals differ from the simulated trajectory";
        std::string amount_detail;
        report.amounts_match = check_amounts(ledger, cfg, rec, amount_detail);
        if (!report.amounts_match && report.detail.empty()) report.detail = amount_detail;
    }
    return report;
}

}  // namespace clab
