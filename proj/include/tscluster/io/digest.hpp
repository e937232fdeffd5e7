#pragma once

#include "tscluster/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <string_view>

namespace tscluster::io {

/// Incremental SHA-256, used to key cached stage outputs by their inputs.
class Sha256 {
public:
  Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw Error("SHA-256 initialisation failed");
  }

  Sha256& update(std::string_view bytes) {
    EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size());
    return *this;
  }

  /// Adds a length-prefixed field so that concatenations stay unambiguous.
  Sha256& field(std::string_view bytes) {
    const std::uint64_t len = bytes.size();
    update(std::string_view(reinterpret_cast<const char*>(&len), sizeof(len)));
    return update(bytes);
  }

  Sha256& file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot read " + path.string());
    std::array<char, 1 << 16> buf{};
    std::uint64_t total = 0;
    while (in) {
      in.read(buf.data(), buf.size());
      const auto got = in.gcount();
      if (got > 0) {
        update(std::string_view(buf.data(), static_cast<std::size_t>(got)));
        total += static_cast<std::uint64_t>(got);
      }
    }
    return update(std::string_view(reinterpret_cast<const char*>(&total), sizeof(total)));
  }

  std::array<unsigned char, 32> finish() {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), out.data(), &len);
    return out;
  }

  std::string hex() {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (unsigned char c : finish()) {
      s.push_back(digits[c >> 4]);
      s.push_back(digits[c & 0xF]);
    }
    return s;
  }

private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

} // namespace tscluster::io
