#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fewie/encoders.hpp"

namespace fewie {

// Binary layout, all integers little-endian:
//   "FEWE" | version u16 = 1 | dim u32 | record_count u64
//   index: record_count x {id_len u16, id bytes, token_count u32, byte_offset u64}
//   data: float32 LE row-major matrices; offsets are absolute.
inline constexpr char kStoreMagic[4] = {'F', 'E', 'W', 'E'};
inline constexpr std::uint16_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderSize = 4 + 2 + 4 + 8;

struct StoreEntry {
  std::string sentence_id;
  std::uint32_t token_count = 0;
  std::uint64_t byte_offset = 0;
};

// Read-only, memory-mapped view of a store file. The index is parsed and
// bounds-checked on open; matrices are decoded on lookup. Safe for
// concurrent readers.
class EmbeddingStore {
 public:
  static EmbeddingStore open(const std::filesystem::path& path);

  EmbeddingStore(EmbeddingStore&& other) noexcept;
  EmbeddingStore& operator=(EmbeddingStore&& other) noexcept;
  EmbeddingStore(const EmbeddingStore&) = delete;
  EmbeddingStore& operator=(const EmbeddingStore&) = delete;
  ~EmbeddingStore();

  const std::filesystem::path& path() const noexcept { return path_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<StoreEntry>& entries() const noexcept { return entries_; }

  const StoreEntry* find(std::string_view sentence_id) const;
  bool contains(std::string_view sentence_id) const { return find(sentence_id) != nullptr; }

  // Throws MissingEmbeddingError for unknown ids.
  EmbeddingMatrix lookup(std::string_view sentence_id) const;

 private:
  EmbeddingStore() = default;

  std::filesystem::path path_;
  std::size_t dim_ = 0;
  std::vector<StoreEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
  const unsigned char* data_ = nullptr;
  std::size_t file_size_ = 0;
};

// Writes records in the given order. Values are narrowed to float32; a value
// that is not finite after narrowing is rejected.
void store_write(const std::filesystem::path& path, std::span<const EmbeddingMatrix> records,
                 std::size_t dim);
EmbeddingStore store_read(const std::filesystem::path& path);

// Bytes store_write would produce, without touching the filesystem.
std::vector<unsigned char> encode_store(std::span<const EmbeddingMatrix> records, std::size_t dim);

// Checks the store against a corpus: every sentence must be present with a
// matching token count. Returns one line per problem.
std::vector<std::string> check_store_alignment(const EmbeddingStore& store, const Corpus& corpus);

}  // namespace fewie
