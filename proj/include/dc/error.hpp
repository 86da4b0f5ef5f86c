#pragma once

#include <stdexcept>
#include <string>

namespace dc {

// Failure categories raised by the library. The CLI maps each category to a
// distinct process exit code; see the README for the table.
enum class ErrorKind {
    invalid_input,      // NaN / non-positive depth, malformed arguments
    out_of_range,       // depth outside the encodable span with clamping off
    missing_pixel,      // decoding an all-zero coefficient vector
    normalization,      // coefficient sum too far from 1
    empty_mask,         // no pixels shared between prediction and ground truth
    invalid_gt,         // non-positive ground truth under relative metrics
    format,             // unreadable or wrongly-typed file
    degenerate_input,   // e.g. all points at a single elevation
    invalid_spec,       // scene description violates its invariants
    invalid_pattern,    // sampling pattern cannot be satisfied
    config,             // inconsistent model/shape configuration
    training_diverged,  // non-finite loss during training
    io,                 // filesystem failure
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace dc
