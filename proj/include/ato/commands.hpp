#pragma once

#include <iosfwd>
#include <string>

namespace ato::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Each command reports failures on `err` and returns the process exit code.
int generate(const std::string& config_path, const std::string& out_path, std::ostream& err);
int fit(const std::string& data_path, const std::string& config_path, const std::string& out_path, bool trace,
        std::ostream& err);
int benchmark(const std::string& config_path, const std::string& out_dir, std::ostream& err);
int gatekeeper(const std::string& data_path, const std::string& config_path, std::ostream& out, std::ostream& err);

// Full command-line entry point.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ato::cli
