#pragma once

// Append-only token ledger and the bond policies that drive it.
//
// INVARIANTS:
//   1. APPEND-ONLY: transactions are never edited or removed.
//   2. INTEGER MONEY: amounts are micro-tokens (1 token = 10^6 micro-tokens);
//      all arithmetic is exact. Negative bond prices clamp to zero.
//   3. CONSERVATION: sum(deposits) = sum(returns) + sum(forfeits)
//      + sum(outstanding stakes), exactly, after every transaction.
//   4. FULL-STAKE SETTLEMENT: a Return or Forfeit always moves the agent's
//      entire outstanding stake. An auditor can replay the log and reject any
//      tampered amount.
//
// Policies (one active per run):
//   FixedPenalty    deposit at enrollment; at each contract boundary the full
//                   stake is returned iff the agent complied throughout the
//                   contract, else forfeited; then re-enrollment at the
//                   current price while the run continues.
//   AdaptivePenalty the contract is reissued every step: settle the previous
//                   stake against the step's draw (return on compliance,
//                   forfeit otherwise), then deposit at the current price.
//   EventDriven     deposit at enrollment; each non-compliance forfeits the
//                   stake and re-deposits at the current price; compliance
//                   emits nothing.
//
// At the end of a run the scheme closes: pending contracts settle and nothing
// is re-staked, so a fully compliant agent's net token flow is exactly zero.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace clab {

struct TokenAmount {
    std::uint64_t micro_tokens = 0;

    friend bool operator==(TokenAmount a, TokenAmount b) = default;
    friend auto operator<=>(TokenAmount a, TokenAmount b) = default;
    TokenAmount& operator+=(TokenAmount o) {
        micro_tokens += o.micro_tokens;
        return *this;
    }
};

inline constexpr std::uint64_t kMicroPerToken = 1'000'000;

enum class PolicyKind { FixedPenalty, AdaptivePenalty, EventDriven };

enum class TxKind { Deposit, Return, Forfeit };

struct LedgerTransaction {
    long step = 0;
    int agent_id = 0;
    TxKind kind = TxKind::Deposit;
    TokenAmount amount;

    friend bool operator==(const LedgerTransaction&, const LedgerTransaction&) = default;
};

// Bond price in micro-tokens: round(unit_scale * max(0, C + c)), half up.
inline TokenAmount bond_price(double c_global, double c_individual, std::uint64_t unit_scale) {
    if (unit_scale < 1) throw std::invalid_argument("bond_price: unit_scale must be >= 1");
    const double signal = c_global + c_individual;
    if (!(signal > 0.0)) return TokenAmount{0};
    const double scaled = static_cast<double>(unit_scale) * signal;
    return TokenAmount{static_cast<std::uint64_t>(std::llround(scaled))};
}

class Ledger {
  public:
    explicit Ledger(int n_agents = 0) : stakes_(static_cast<std::size_t>(n_agents)) {}

    void append(const LedgerTransaction& tx) {
        auto& stake = stake_at(tx.agent_id);
        switch (tx.kind) {
            case TxKind::Deposit:
                stake += tx.amount.micro_tokens;
                break;
            case TxKind::Return:
            case TxKind::Forfeit:
                if (tx.amount.micro_tokens > stake)
                    throw std::invalid_argument("ledger: settlement exceeds outstanding stake");
                stake -= tx.amount.micro_tokens;
                if (tx.kind == TxKind::Forfeit)
                    forfeited_total_.micro_tokens += tx.amount.micro_tokens;
                break;
        }
        log_.push_back(tx);
    }

    const std::vector<LedgerTransaction>& log() const { return log_; }
    TokenAmount stake_of(int agent_id) const {
        return TokenAmount{stakes_[static_cast<std::size_t>(agent_id)]};
    }
    int n_agents() const { return static_cast<int>(stakes_.size()); }
    TokenAmount forfeited_total() const { return forfeited_total_; }

    // Test hook: overwrite the recorded stake of one agent without touching
    // the log, so conservation checks can be exercised against a bad record.
    void overwrite_stake_record(int agent_id, TokenAmount v) {
        stake_at(agent_id) = v.micro_tokens;
    }

  private:
    std::uint64_t& stake_at(int agent_id) {
        if (agent_id < 0 || agent_id >= n_agents())
            throw std::invalid_argument("ledger: agent id out of range");
        return stakes_[static_cast<std::size_t>(agent_id)];
    }

    std::vector<LedgerTransaction> log_;
    std::vector<std::uint64_t> stakes_;  // outstanding per agent
    TokenAmount forfeited_total_;
};

// Replays the log and checks, after every transaction, that no settlement
// exceeds the stake it settles, and at the end that the replayed outstanding
// stakes match the ledger's records and the conservation identity holds.
inline bool verify_conservation(const Ledger& ledger) {
    std::vector<std::uint64_t> stakes(static_cast<std::size_t>(ledger.n_agents()), 0);
    std::uint64_t deposits = 0, returns = 0, forfeits = 0, outstanding = 0;
    for (const LedgerTransaction& tx : ledger.log()) {
        if (tx.agent_id < 0 || tx.agent_id >= ledger.n_agents()) return false;
        auto& stake = stakes[static_cast<std::size_t>(tx.agent_id)];
        switch (tx.kind) {
            case TxKind::Deposit:
                stake += tx.amount.micro_tokens;
                deposits += tx.amount.micro_tokens;
                outstanding += tx.amount.micro_tokens;
                break;
            case TxKind::Return:
            case TxKind::Forfeit:
                if (tx.amount.micro_tokens > stake) return false;
                stake -= tx.amount.micro_tokens;
                outstanding -= tx.amount.micro_tokens;
                (tx.kind == TxKind::Return ? returns : forfeits) += tx.amount.micro_tokens;
                break;
        }
        if (deposits != returns + forfeits + outstanding) return false;  // cannot trip: exact ints
    }
    for (int i = 0; i < ledger.n_agents(); ++i)
        if (stakes[static_cast<std::size_t>(i)] != ledger.stake_of(i).micro_tokens) return false;
    std::uint64_t recorded_outstanding = 0;
    for (int i = 0; i < ledger.n_agents(); ++i)
        recorded_outstanding += ledger.stake_of(i).micro_tokens;
    return deposits == returns + forfeits + recorded_outstanding &&
           forfeits == ledger.forfeited_total().micro_tokens;
}

// Per-run policy machine. enroll() before the first draw, apply() once per
// agent per draw step, settle_run_end() after the final draw's apply().
class PolicyEngine {
  public:
    PolicyEngine(PolicyKind kind, int n_agents, long horizon, long contract_len = 0)
        : kind_(kind),
          horizon_(horizon),
          contract_len_(contract_len > 0 ? contract_len : horizon),
          complied_all_(static_cast<std::size_t>(n_agents), 1) {
        if (horizon < 1) throw std::invalid_argument("policy: horizon must be >= 1");
    }

    PolicyKind kind() const { return kind_; }
    long contract_len() const { return contract_len_; }

    void enroll(Ledger& ledger, int agent_id, TokenAmount price, long step) {
        ledger.append({step, agent_id, TxKind::Deposit, price});
    }

    // Settles agent agent_id's draw at `step` (1-based). `price` is the bond
    // price from the step's signals; re-deposits use it.
    void apply(Ledger& ledger, int agent_id, int complied, TokenAmount price, long step) {
        switch (kind_) {
            case PolicyKind::AdaptivePenalty: {
                const TokenAmount stake = ledger.stake_of(agent_id);
                ledger.append({step, agent_id, complied ? TxKind::Return : TxKind::Forfeit, stake});
                if (step < horizon_) ledger.append({step, agent_id, TxKind::Deposit, price});
                break;
            }
            case PolicyKind::EventDriven: {
                if (complied) {
                    // A compliant step emits nothing, except that an agent
                    // left without a stake re-enrolls at the current price.
                    if (ledger.stake_of(agent_id).micro_tokens == 0 &&
                        price.micro_tokens > 0 && step < horizon_)
                        ledger.append({step, agent_id, TxKind::Deposit, price});
                    break;
                }
                const TokenAmount stake = ledger.stake_of(agent_id);
                ledger.append({step, agent_id, TxKind::Forfeit, stake});
                if (step < horizon_) ledger.append({step, agent_id, TxKind::Deposit, price});
                break;
            }
            case PolicyKind::FixedPenalty: {
                auto& flag = complied_all_[static_cast<std::size_t>(agent_id)];
                flag = static_cast<std::uint8_t>(flag && complied);
                if (step % contract_len_ == 0 || step == horizon_) {
                    const TokenAmount stake = ledger.stake_of(agent_id);
                    ledger.append(
                        {step, agent_id, flag ? TxKind::Return : TxKind::Forfeit, stake});
                    flag = 1;
                    if (step < horizon_) ledger.append({step, agent_id, TxKind::Deposit, price});
                }
                break;
            }
        }
    }

    // Closes the scheme: any stake still outstanding goes back to its owner.
    // FixedPenalty and AdaptivePenalty already settle at step == horizon, so
    // this only moves tokens for EventDriven (whose contracts have no end).
    void settle_run_end(Ledger& ledger, long step) {
        for (int i = 0; i < ledger.n_agents(); ++i) {
            const TokenAmount stake = ledger.stake_of(i);
            if (stake.micro_tokens > 0) ledger.append({step, i, TxKind::Return, stake});
        }
    }

  private:
    PolicyKind kind_;
    long horizon_;
    long contract_len_;
    std::vector<std::uint8_t> complied_all_;  // FixedPenalty: complied so far this contract
};

// ---------------------------------------------------------------------------
// Ledger file format, version 1:
//   # ledger v1
//   step,agent_id,kind,amount        one line per transaction, kind DEP|RET|FOR
// ---------------------------------------------------------------------------

inline const char* tx_kind_tag(TxKind k) {
    switch (k) {
        case TxKind::Deposit: return "DEP";
        case TxKind::Return: return "RET";
        case TxKind::Forfeit: return "FOR";
    }
    return "?";
}

inline void write_ledger(const Ledger& ledger, std::ostream& out) {
    out << "# ledger v1\n";
    for (const LedgerTransaction& tx : ledger.log())
        out << tx.step << ',' << tx.agent_id << ',' << tx_kind_tag(tx.kind) << ','
            << tx.amount.micro_tokens << '\n';
}

inline void write_ledger_file(const Ledger& ledger, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open ledger file for writing: " + path);
    write_ledger(ledger, out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for ledger file: " + path);
}

inline Ledger read_ledger(std::istream& in, int n_agents) {
    std::string line;
    if (!std::getline(in, line) || line != "# ledger v1")
        throw std::runtime_error("ledger file: missing '# ledger v1' header");
    Ledger ledger(n_agents);
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        LedgerTransaction tx;
        char kind_buf[4] = {0};
        unsigned long long amount = 0;
        std::istringstream ls(line);
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(ls >> tx.step >> c1 >> tx.agent_id >> c2) || c1 != ',' || c2 != ',' ||
            !ls.get(kind_buf, 4) || !(ls >> c3 >> amount) || c3 != ',')
            throw std::runtime_error("ledger file: malformed line " + std::to_string(line_no));
        const std::string kind(kind_buf);
        if (kind == "DEP") tx.kind = TxKind::Deposit;
        else if (kind == "RET") tx.kind = TxKind::Return;
        else if (kind == "FOR") tx.kind = TxKind::Forfeit;
        else throw std::runtime_error("ledger file: unknown kind at line " + std::to_string(line_no));
        tx.amount = TokenAmount{amount};
        ledger.append(tx);
    }
    return ledger;
}

inline Ledger read_ledger_file(const std::string& path, int n_agents) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open ledger file: " + path);
    return read_ledger(in, n_agents);
}

}  // namespace clab
