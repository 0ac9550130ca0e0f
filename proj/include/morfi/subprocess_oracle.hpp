#pragma once

#include "morfi/steering.hpp"

#include <cstdio>
#include <string>

namespace morfi {

// Drives an external model process over line-delimited JSON. One request per
// line on the child's stdin, one response per line on its stdout:
//
//   {"baseline": true}                          -> {"accuracy": 0.31}
//   {"latent": 17, "c": 1, "alpha": 0.4}        -> {"accuracy": 0.52}
//   {"vector": [..], "c": -1, "alpha": 0.35}    -> {"accuracy": 0.44}
//
// Composite requests carry the latent-space delta; the child owns the
// dictionary projection and the layer scale. A nonempty dataset id is passed
// through as "dataset". The child must answer requests in order and exit when
// its stdin closes. Protocol violations, early exit, and malformed JSON all
// surface as OracleError.
class SubprocessOracle final : public ModelOracle {
public:
    explicit SubprocessOracle(const std::string& command);
    ~SubprocessOracle() override;

    SubprocessOracle(const SubprocessOracle&) = delete;
    SubprocessOracle& operator=(const SubprocessOracle&) = delete;

    double evaluate(const std::optional<SteeringSpec>& spec, const std::string& dataset) override;
    bool concurrent_safe() const override { return false; }

private:
    void send_line(const std::string& line);
    std::string read_line();
    [[noreturn]] void fail(const std::string& what);
    void reap() noexcept;

    int child_pid_ = -1;
    int to_child_ = -1;       // our write end of the child's stdin
    std::FILE* from_child_ = nullptr;
    bool reaped_ = false;
    int exit_status_ = -1;
};

} // namespace morfi
