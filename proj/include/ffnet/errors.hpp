#pragma once

#include <stdexcept>

namespace ffnet {

// malformed file contents (bad magic, bad version, bad record size)
struct format_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// file unreadable, unwritable or truncated mid-read
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// checkpoint was produced by a different architecture
struct spec_mismatch_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// dataset record carries a class index outside [0, class_count)
struct label_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ffnet
