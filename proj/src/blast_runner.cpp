#include "protrag/blast_runner.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <sstream>

#include "protrag/error.hpp"
#include "protrag/text.hpp"

extern char** environ;

namespace protrag {

std::vector<std::string> blast_argv(const BlastCommand& cmd, const std::filesystem::path& query_fasta,
                                    const std::filesystem::path& out_path) {
    if (cmd.database.empty()) throw ConfigError("blast.db is not set");
    return {cmd.binary,
            "-query",
            query_fasta.string(),
            "-db",
            cmd.database,
            "-outfmt",
            kBlastOutfmt,
            "-max_hsps",
            "1",
            "-max_target_seqs",
            std::to_string(cmd.max_target_seqs),
            "-evalue",
            text::format_double(cmd.evalue),
            "-num_threads",
            std::to_string(cmd.threads),
            "-out",
            out_path.string()};
}

std::string format_command_line(const std::vector<std::string>& argv) {
    std::string out;
    for (const auto& a : argv) {
        if (!out.empty()) out += ' ';
        const bool plain = !a.empty() && a.find_first_not_of("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
                                                             "0123456789_-./=:,+") == std::string::npos;
        if (plain) {
            out += a;
        } else {
            out += '\'';
            for (char c : a) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
            out += '\'';
        }
    }
    return out;
}

std::filesystem::path find_executable(const std::string& name) {
    if (name.empty()) return {};
    if (name.find('/') != std::string::npos) return ::access(name.c_str(), X_OK) == 0 ? std::filesystem::path(name) : "";
    const char* path = std::getenv("PATH");
    if (!path) return {};
    for (const auto& dir : text::split(path, ':')) {
        if (dir.empty()) continue;
        auto candidate = std::filesystem::path(dir) / name;
        if (::access(candidate.c_str(), X_OK) == 0) return candidate;
    }
    return {};
}

BlastRunResult run_blast(const BlastCommand& cmd, const std::filesystem::path& query_fasta,
                         const std::filesystem::path& out_path) {
    const auto exe = find_executable(cmd.binary);
    if (exe.empty())
        throw Error("BLAST binary '" + cmd.binary +
                    "' was not found; install BLAST+ or pass precomputed hits with --hits <file>");
    auto argv = blast_argv(cmd, query_fasta, out_path);
    const auto stderr_path = out_path.string() + ".stderr";

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    std::vector<char*> cargv;
    for (auto& a : argv) cargv.push_back(a.data());
    cargv.push_back(nullptr);
    pid_t pid = 0;
    const int rc = posix_spawn(&pid, exe.c_str(), &actions, nullptr, cargv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) throw Error("cannot start " + exe.string() + ": " + std::strerror(rc));

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw Error(std::string("waitpid failed: ") + std::strerror(errno));
    }
    std::string diagnostics;
    {
        std::ifstream in(stderr_path);
        std::ostringstream ss;
        ss << in.rdbuf();
        diagnostics = ss.str();
    }
    std::error_code ec;
    std::filesystem::remove(stderr_path, ec);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        const std::string how = WIFEXITED(status) ? "exited with status " + std::to_string(WEXITSTATUS(status))
                                                  : "was terminated by a signal";
        throw Error(cmd.binary + " " + how + ": " + std::string(text::trim(diagnostics)));
    }
    return BlastRunResult{format_command_line(argv), out_path};
}

}  // namespace protrag
