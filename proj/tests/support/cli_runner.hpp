#pragma once

// Helpers for driving the built CLI binary from tests.

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "abusepipe/io.hpp"

namespace testsupport {

inline std::string source_dir() { return ABUSEPIPE_SOURCE_DIR; }
inline std::string cli_path() { return ABUSEPIPE_CLI_PATH; }

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("abusepipe_test_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline CliResult run_cli(const std::vector<std::string>& args, const TempDir& dir) {
    std::string out_file = dir.file("stdout_" + std::to_string(rand()) + ".txt");
    std::string err_file = out_file + ".err";
    std::string cmd = cli_path();
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " >" + out_file + " 2>" + err_file;
    int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = abusepipe::read_file(out_file);
    r.err = abusepipe::read_file(err_file);
    return r;
}

}  // namespace testsupport
