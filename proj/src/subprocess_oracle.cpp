#include "morfi/subprocess_oracle.hpp"

#include <json.hpp>

#include <csignal>
#include <cerrno>
#include <cmath>
#include <cstring>

#include <sys/wait.h>
#include <unistd.h>

namespace morfi {

namespace {

using json = nlohmann::json;

// Dead children must surface as EPIPE on write, not as process death.
void ignore_sigpipe_once() {
    static const int once = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return 0;
    }();
    (void)once;
}

std::string describe_status(int status) {
    if (status < 0) return "not started";
    if (WIFEXITED(status)) return "exit code " + std::to_string(WEXITSTATUS(status));
    if (WIFSIGNALED(status)) return "killed by signal " + std::to_string(WTERMSIG(status));
    return "status " + std::to_string(status);
}

} // namespace

SubprocessOracle::SubprocessOracle(const std::string& command) {
    if (command.empty()) throw ValidationError("external oracle: empty command");
    ignore_sigpipe_once();

    int in_pipe[2];  // parent -> child
    int out_pipe[2]; // child -> parent
    if (pipe(in_pipe) != 0) throw OracleError("external oracle: pipe failed");
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw OracleError("external oracle: pipe failed");
    }

    const pid_t pid = fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
        throw OracleError("external oracle: fork failed");
    }
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
        execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    close(in_pipe[0]);
    close(out_pipe[1]);
    child_pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = fdopen(out_pipe[0], "r");
    if (!from_child_) {
        close(out_pipe[0]);
        reap();
        throw OracleError("external oracle: fdopen failed");
    }
}

SubprocessOracle::~SubprocessOracle() {
    if (to_child_ >= 0) {
        close(to_child_);
        to_child_ = -1;
    }
    if (from_child_) {
        std::fclose(from_child_);
        from_child_ = nullptr;
    }
    reap();
}

void SubprocessOracle::reap() noexcept {
    if (reaped_ || child_pid_ < 0) return;
    int status = 0;
    if (waitpid(child_pid_, &status, 0) == child_pid_) exit_status_ = status;
    reaped_ = true;
}

void SubprocessOracle::fail(const std::string& what) {
    if (to_child_ >= 0) {
        close(to_child_);
        to_child_ = -1;
    }
    reap();
    throw OracleError("external oracle: " + what + " (child " + describe_status(exit_status_) +
                      ")");
}

void SubprocessOracle::send_line(const std::string& line) {
    std::string buf = line;
    buf.push_back('\n');
    size_t off = 0;
    while (off < buf.size()) {
        const ssize_t n = write(to_child_, buf.data() + off, buf.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(std::string("request write failed: ") + std::strerror(errno));
        }
        off += static_cast<size_t>(n);
    }
}

std::string SubprocessOracle::read_line() {
    std::string out;
    int ch;
    while ((ch = std::fgetc(from_child_)) != EOF) {
        if (ch == '\n') return out;
        out.push_back(static_cast<char>(ch));
    }
    if (!out.empty()) return out; // tolerate a missing trailing newline on the last response
    fail("no response (stream closed)");
}

double SubprocessOracle::evaluate(const std::optional<SteeringSpec>& spec,
                                  const std::string& dataset) {
    json req;
    if (!spec) {
        req["baseline"] = true;
    } else {
        if (spec->is_latent()) {
            req["latent"] = spec->latent();
        } else {
            const auto& delta = std::get<Eigen::VectorXd>(spec->source);
            auto& arr = req["vector"] = json::array();
            for (Index i = 0; i < delta.size(); ++i) arr.push_back(delta[i]);
        }
        req["c"] = spec->polarity;
        req["alpha"] = spec->strength;
    }
    if (!dataset.empty()) req["dataset"] = dataset;

    send_line(req.dump());
    const std::string line = read_line();

    const json res = json::parse(line, nullptr, false);
    if (res.is_discarded() || !res.is_object())
        fail("malformed response: " + line.substr(0, 200));
    const auto it = res.find("accuracy");
    if (it == res.end() || !it->is_number())
        fail("response lacks numeric \"accuracy\": " + line.substr(0, 200));
    const double acc = it->get<double>();
    if (!std::isfinite(acc)) fail("non-finite accuracy");
    return acc;
}

} // namespace morfi
