#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "causal_gate/error.hpp"

namespace test_support {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("causal_gate_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace test_support

// Checks that `expr` throws causal_gate::Error with the given code.
#define CHECK_THROWS_CODE(expr, expected_code)                                         \
    do {                                                                               \
        bool caught_ = false;                                                          \
        try {                                                                          \
            (void)(expr);                                                              \
        } catch (const causal_gate::Error& e_) {                                       \
            caught_ = true;                                                            \
            CHECK_MESSAGE(e_.code() == causal_gate::ErrorCode::expected_code, e_.what()); \
        }                                                                              \
        CHECK_MESSAGE(caught_, "expected error " #expected_code);                     \
    } while (0)
