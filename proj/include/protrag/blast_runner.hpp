#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace protrag {

struct BlastCommand {
    std::string binary = "blastp";
    std::string database;
    double evalue = 10.0;
    unsigned max_target_seqs = 50;
    unsigned threads = 1;
};

inline constexpr const char* kBlastOutfmt = "6 qseqid sseqid pident length nident evalue bitscore";

/// Argument vector (argv[0] included) producing the 7-column tabular format with
/// one HSP per subject.
std::vector<std::string> blast_argv(const BlastCommand& cmd, const std::filesystem::path& query_fasta,
                                    const std::filesystem::path& out_path);

/// Shell-quoted rendering of an argument vector, for run metadata.
std::string format_command_line(const std::vector<std::string>& argv);

/// Empty when the binary cannot be found or is not executable.
std::filesystem::path find_executable(const std::string& name);

struct BlastRunResult {
    std::string command_line;
    std::filesystem::path hits_path;
};

/// Runs the binary and waits for it. Throws Error mentioning `--hits` when the
/// binary is missing, and Error with the captured stderr on a nonzero exit.
BlastRunResult run_blast(const BlastCommand& cmd, const std::filesystem::path& query_fasta,
                         const std::filesystem::path& out_path);

}  // namespace protrag
