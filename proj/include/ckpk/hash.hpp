#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <initializer_list>
#include <string>
#include <string_view>

namespace ckpk {

/// Lower-case hex SHA-256 of `data`.
inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

/// Hash of several fields joined by the ASCII unit separator, so that
/// ("ab", "c") and ("a", "bc") never collide.
inline std::string hash_fields(std::initializer_list<std::string_view> fields) {
  std::string joined;
  bool first = true;
  for (auto f : fields) {
    if (!first) joined.push_back('\x1f');
    joined.append(f);
    first = false;
  }
  return sha256_hex(joined);
}

}  // namespace ckpk
