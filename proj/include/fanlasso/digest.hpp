#pragma once

#include <string>
#include <string_view>

namespace fanlasso {

// Lowercase hex SHA-1 of the bytes.
std::string sha1_hex(std::string_view bytes);

// Git-style content digest: SHA-1 over "blob <size>\0" + content. Matches
// `git hash-object` so artifacts can be cross-checked with stock tooling.
std::string content_digest(std::string_view content);

}  // namespace fanlasso
