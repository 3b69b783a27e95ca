#pragma once

#include <cstdint>
#include <string>

namespace critmc {

/// SHA-1 hex digest of a byte string.
std::string sha1_hex(const std::string& data);

/// Git-style blob hash: sha1("blob <len>\0" + content).
std::string git_blob_hash(const std::string& content);

}  // namespace critmc
