#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace depprobe::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;

// Everything needed to rerun a command. Timings only go to the standalone
// manifest file so that embedded copies stay byte-stable.
struct RunManifest {
    std::string command;
    std::vector<std::pair<std::string, std::string>> inputs;
    std::vector<std::pair<std::string, std::string>> config;
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<std::string, std::string>> outputs;
    std::vector<std::pair<std::string, double>> timings;

    void write(std::ostream& out, bool with_timings) const;
    // Same lines prefixed with "# ", without timings.
    void write_comment(std::ostream& out) const;
};

std::string tool_version();

// Runs task(i) for i in [0, count) on up to `jobs` threads. Exceptions are
// rethrown for the lowest failing index.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace depprobe::cli
