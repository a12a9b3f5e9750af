#include "dcm/sandbox.hpp"

#include "dcm/error.hpp"
#include "dcm/parse.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace dcm {

namespace fs = std::filesystem;

std::string format_answer_block(const ExtractedAnswer& answer) {
    std::string out(kAnswerBegin);
    out += "\nobjective=" + format_number(answer.objective) + "\n";
    for (const auto& [name, value] : answer.requirements) out += name + "=" + format_number(value) + "\n";
    out += kAnswerEnd;
    out += "\n";
    return out;
}

std::optional<ExtractedAnswer> parse_answer_block(std::string_view output) {
    const auto lines = split_lines(output);
    std::size_t begin = lines.size(), end = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto t = trim(lines[i]);
        if (t == kAnswerBegin) {
            if (begin != lines.size()) return std::nullopt; // more than one block
            begin = i;
        } else if (t == kAnswerEnd) {
            if (begin == lines.size() || end != lines.size()) return std::nullopt;
            end = i;
        }
    }
    if (begin == lines.size() || end == lines.size() || end <= begin + 1) return std::nullopt;

    ExtractedAnswer answer;
    std::set<std::string> names;
    for (std::size_t i = begin + 1; i < end; ++i) {
        const auto t = trim(lines[i]);
        const auto eq = t.find('=');
        if (eq == std::string::npos) return std::nullopt;
        const auto key = trim(std::string_view(t).substr(0, eq));
        const auto value = parse_number(std::string_view(t).substr(eq + 1));
        if (key.empty() || !value || !names.insert(key).second) return std::nullopt;
        if (i == begin + 1) {
            if (key != "objective") return std::nullopt;
            answer.objective = *value;
        } else {
            if (key == "objective") return std::nullopt;
            answer.requirements.emplace_back(key, *value);
        }
    }
    return answer;
}

std::vector<std::string> SandboxPolicy::default_allowed_libraries() {
    return {"gurobipy", "pulp", "ortools", "scipy", "networkx"};
}

namespace {

const std::set<std::string, std::less<>>& support_modules() {
    static const std::set<std::string, std::less<>> modules = {
        "math", "itertools", "collections", "functools", "sys", "json", "re", "typing", "heapq",
        "fractions", "decimal", "statistics", "numpy", "dataclasses", "copy", "operator", "time",
        "random", "bisect", "enum", "__future__"};
    return modules;
}

std::string module_root(std::string_view name) {
    auto t = trim(name);
    if (auto space = t.find_first_of(" \t"); space != std::string::npos) t = t.substr(0, space);
    if (auto dot = t.find('.'); dot != std::string::npos) t = t.substr(0, dot);
    return t;
}

} // namespace

std::vector<std::string> scan_imports(std::string_view script) {
    std::vector<std::string> out;
    auto add = [&out](std::string name) {
        if (!name.empty() && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
    };
    for (const auto& raw : split_lines(script)) {
        std::stringstream statements(raw);
        std::string statement;
        while (std::getline(statements, statement, ';')) {
            const auto t = trim(statement);
            if (t.rfind("import ", 0) == 0) {
                std::stringstream names(t.substr(7));
                std::string item;
                while (std::getline(names, item, ',')) add(module_root(item));
            } else if (t.rfind("from ", 0) == 0) {
                const auto rest = trim(std::string_view(t).substr(5));
                if (!rest.empty() && rest.front() != '.') add(module_root(rest));
            }
        }
    }
    return out;
}

std::vector<std::string> disallowed_imports(std::string_view script, const std::vector<std::string>& allowed) {
    std::vector<std::string> out;
    for (const auto& name : scan_imports(script)) {
        if (support_modules().contains(name)) continue;
        if (std::find(allowed.begin(), allowed.end(), name) != allowed.end()) continue;
        out.push_back(name);
    }
    return out;
}

namespace {

std::optional<ExecutionResult> import_violation(std::string_view script, const std::vector<std::string>& allowed) {
    const auto bad = disallowed_imports(script, allowed);
    if (bad.empty()) return std::nullopt;
    ExecutionResult result;
    result.status = ExecStatus::runtime_error;
    result.stderr_text = "ImportError: library not allowed:";
    for (const auto& name : bad) result.stderr_text += " " + name;
    return result;
}

} // namespace

ExecutionResult stub_execute(std::string_view script) {
    ExecutionResult result;
    for (const auto& line : split_lines(script)) {
        const auto at = line.find("STUB:");
        if (at == std::string::npos) continue;
        const auto directive = trim(std::string_view(line).substr(at + 5));
        const auto space = directive.find(' ');
        const auto kind = directive.substr(0, space);
        const auto rest = space == std::string::npos ? std::string{} : trim(std::string_view(directive).substr(space));
        if (kind == "success") {
            std::istringstream in(rest);
            std::string token;
            ExtractedAnswer answer;
            bool ok = false;
            bool bad = false;
            while (in >> token) {
                const auto eq = token.find('=');
                auto value = eq == std::string::npos ? std::nullopt : parse_number(std::string_view(token).substr(eq + 1));
                if (!value) {
                    bad = true;
                    break;
                }
                const auto key = token.substr(0, eq);
                if (key == "objective") {
                    answer.objective = *value;
                    ok = true;
                } else {
                    answer.requirements.emplace_back(key, *value);
                }
            }
            if (!ok || bad) {
                result.status = ExecStatus::non_numeric_output;
                result.stdout_text = "stub success directive without a numeric objective";
                return result;
            }
            result.status = ExecStatus::success;
            result.stdout_text = format_answer_block(answer);
            result.extracted = std::move(answer);
            return result;
        }
        if (kind == "runtime_error") {
            result.status = ExecStatus::runtime_error;
            const auto msg = rest.rfind("message=", 0) == 0 ? rest.substr(8) : rest;
            result.stderr_text = msg.empty() ? "stub runtime error" : msg;
            return result;
        }
        if (kind == "timeout") {
            result.status = ExecStatus::timeout;
            result.stderr_text = std::string(kTimeoutMarker);
            return result;
        }
        if (kind == "non_numeric") {
            result.status = ExecStatus::non_numeric_output;
            result.stdout_text = "no answer block";
            return result;
        }
    }
    result.status = ExecStatus::runtime_error;
    result.stderr_text = "stub executor: script has no STUB directive";
    return result;
}

StubExecutor::StubExecutor(std::vector<std::string> allowed) : allowed_(std::move(allowed)) {}

ExecutionResult StubExecutor::run(std::string_view script) {
    if (auto violation = import_violation(script, allowed_)) return *violation;
    return stub_execute(script);
}

namespace {

class TempDir {
public:
    TempDir() {
        std::string pattern = (fs::temp_directory_path() / "dcm-run-XXXXXX").string();
        if (!mkdtemp(pattern.data())) throw EnvironmentError("cannot create temporary directory: " + std::string(std::strerror(errno)));
        path_ = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

class SemaphoreSlot {
public:
    explicit SemaphoreSlot(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
    ~SemaphoreSlot() { s_.release(); }
    SemaphoreSlot(const SemaphoreSlot&) = delete;
    SemaphoreSlot& operator=(const SemaphoreSlot&) = delete;

private:
    std::counting_semaphore<>& s_;
};

struct Capture {
    std::string text;
    bool truncated = false;
};

void append_capped(Capture& capture, const char* data, std::size_t n, std::size_t cap) {
    if (capture.text.size() >= cap) {
        capture.truncated = capture.truncated || n > 0;
        return;
    }
    const std::size_t take = std::min(n, cap - capture.text.size());
    capture.text.append(data, take);
    if (take < n) capture.truncated = true;
}

} // namespace

HarnessExecutor::HarnessExecutor(std::string harness_path, SandboxPolicy policy, int max_parallel)
    : harness_path_(std::move(harness_path)), policy_(std::move(policy)), slots_(std::max(1, max_parallel)) {
    if (policy_.timeout_seconds <= 0) throw InputError("sandbox timeout must be > 0");
}

ExecutionResult HarnessExecutor::run(std::string_view script) {
    if (access(harness_path_.c_str(), X_OK) != 0) {
        throw EnvironmentError("execution harness not found or not executable: " + harness_path_);
    }
    if (auto violation = import_violation(script, policy_.allowed_libraries)) return *violation;

    SemaphoreSlot slot(slots_);
    TempDir dir;
    const auto script_path = dir.path() / "solution.py";
    {
        std::ofstream out(script_path);
        out << script;
        if (!out) throw EnvironmentError("cannot write script to " + script_path.string());
    }

    int out_pipe[2], err_pipe[2];
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0) throw EnvironmentError("pipe() failed");

    const std::string timeout_arg = format_number(policy_.timeout_seconds);
    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = fork();
    if (pid < 0) throw EnvironmentError("fork() failed");
    if (pid == 0) {
        setpgid(0, 0);
        if (chdir(dir.path().c_str()) != 0) _exit(127);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        close(out_pipe[0]);
        close(err_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[1]);
        setenv("DCM_NETWORK", policy_.allow_network ? "1" : "0", 1);
        const std::string script_arg = script_path.string();
        execl(harness_path_.c_str(), harness_path_.c_str(), script_arg.c_str(), timeout_arg.c_str(),
              static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid, pid);
    close(out_pipe[1]);
    close(err_pipe[1]);

    const auto deadline = start + std::chrono::duration<double>(policy_.timeout_seconds + 1.0);
    Capture out, err;
    bool killed = false;
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    int open_fds = 2;
    char buffer[4096];
    while (open_fds > 0) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            kill(-pid, SIGKILL);
            killed = true;
            break;
        }
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        const int ready = poll(fds, 2, static_cast<int>(std::max<long long>(1, remaining)));
        if (ready < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const ssize_t n = read(fds[i].fd, buffer, sizeof(buffer));
            if (n <= 0) {
                close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
                continue;
            }
            append_capped(i == 0 ? out : err, buffer, static_cast<std::size_t>(n), policy_.max_output_bytes);
        }
    }
    for (auto& fd : fds) {
        if (fd.fd >= 0) close(fd.fd);
    }
    int status = 0;
    waitpid(pid, &status, 0);
    if (!killed) kill(-pid, SIGKILL); // stray grandchildren
    const auto end = std::chrono::steady_clock::now();

    ExecutionResult result;
    result.wall_time = std::chrono::duration<double>(end - start).count();
    result.stdout_text = out.text + (out.truncated ? std::string(kTruncationMarker) : "");
    result.stderr_text = err.text + (err.truncated ? std::string(kTruncationMarker) : "");

    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (killed) {
        result.status = ExecStatus::timeout;
        result.stderr_text += std::string(kTimeoutMarker);
    } else if (code == 127) {
        throw EnvironmentError("execution harness could not be started: " + harness_path_);
    } else if (code == kExitSuccess) {
        result.extracted = parse_answer_block(out.text);
        result.status = result.extracted ? ExecStatus::success : ExecStatus::non_numeric_output;
    } else if (code == kExitTimeout) {
        result.status = ExecStatus::timeout;
    } else if (code == kExitNonNumeric) {
        result.status = ExecStatus::non_numeric_output;
    } else {
        result.status = ExecStatus::runtime_error;
    }
    return result;
}

bool numbers_match(double a, double b, double rel_tol, double abs_floor) {
    if (!std::isfinite(a) || !std::isfinite(b)) return false;
    const double tol = std::max(rel_tol * std::max(std::fabs(a), std::fabs(b)), abs_floor);
    return std::fabs(a - b) <= tol;
}

bool judge(const ExtractedAnswer& extracted, const GroundTruth& truth, double rel_tol, double abs_floor) {
    if (!numbers_match(extracted.objective, truth.objective, rel_tol, abs_floor)) return false;
    for (const auto& [name, expected] : truth.requirements) {
        auto it = std::find_if(extracted.requirements.begin(), extracted.requirements.end(),
                               [&name](const auto& kv) { return kv.first == name; });
        if (it == extracted.requirements.end()) return false;
        if (!numbers_match(it->second, expected, rel_tol, abs_floor)) return false;
    }
    return true;
}

} // namespace dcm
