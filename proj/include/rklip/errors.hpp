#pragma once

#include <stdexcept>
#include <string>

namespace rklip {

enum class ErrorKind {
    config,            // invalid configuration or parameters
    shape,             // tensor/image dimension mismatch
    data,              // bad or missing input data
    format,            // malformed file on disk
    state,             // operation invalid in current state
    conflict,          // duplicate identifier
    not_found,         // missing identifier
    degenerate_input,  // numerically unusable input (e.g. zero-norm vector)
    index,             // index out of range
    empty_input,       // empty batch / list where at least one element is required
    training,          // training aborted (non-finite loss)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    // CLI exit-code taxonomy: 1 = usage/config, 2 = data/format.
    int exit_code() const noexcept {
        switch (kind_) {
            case ErrorKind::config:
            case ErrorKind::index:
            case ErrorKind::empty_input:
            case ErrorKind::degenerate_input:
                return 1;
            default:
                return 2;
        }
    }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& m) { return Error(ErrorKind::config, m); }
inline Error shape_error(const std::string& m) { return Error(ErrorKind::shape, m); }
inline Error data_error(const std::string& m) { return Error(ErrorKind::data, m); }
inline Error format_error(const std::string& m) { return Error(ErrorKind::format, m); }
inline Error state_error(const std::string& m) { return Error(ErrorKind::state, m); }
inline Error conflict_error(const std::string& m) { return Error(ErrorKind::conflict, m); }
inline Error not_found_error(const std::string& m) { return Error(ErrorKind::not_found, m); }
inline Error degenerate_input_error(const std::string& m) { return Error(ErrorKind::degenerate_input, m); }
inline Error index_error(const std::string& m) { return Error(ErrorKind::index, m); }
inline Error empty_input_error(const std::string& m) { return Error(ErrorKind::empty_input, m); }
inline Error training_error(const std::string& m) { return Error(ErrorKind::training, m); }

}  // namespace rklip
