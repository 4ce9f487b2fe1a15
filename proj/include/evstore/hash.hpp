#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace evstore {

// SHA-256, used for backup ids and store content fingerprints.
class Sha256 {
 public:
  Sha256();
  void update(const void* data, std::size_t len);
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::string hex_digest();

 private:
  void process_block(const std::uint8_t* block);

  std::uint32_t state_[8];
  std::uint8_t buffer_[64];
  std::uint64_t total_len_ = 0;
  std::size_t buffer_len_ = 0;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& file);

}  // namespace evstore
