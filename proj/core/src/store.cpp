#include "fewie/store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_set>
#include <utility>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include "fewie/error.hpp"

namespace fewie {

namespace {

template <typename T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(u >> (8 * i)));
}

template <typename T>
T get_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(p[i]) << (8 * i));
  return v;
}

}  // namespace

std::vector<unsigned char> encode_store(std::span<const EmbeddingMatrix> records, std::size_t dim) {
  if (dim == 0 || dim > std::numeric_limits<std::uint32_t>::max()) {
    throw PreconditionError("store dim must be in [1, 2^32)");
  }
  std::unordered_set<std::string_view> ids;
  std::uint64_t index_size = 0;
  for (const auto& r : records) {
    if (static_cast<std::size_t>(r.dim()) != dim) {
      throw PreconditionError("record '" + r.sentence_id + "' has " + std::to_string(r.dim()) +
                              " columns, store dim is " + std::to_string(dim));
    }
    if (!ids.insert(r.sentence_id).second) {
      throw PreconditionError("duplicate sentence id '" + r.sentence_id + "' in store records");
    }
    if (r.sentence_id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw PreconditionError("sentence id too long for the store index");
    }
    index_size += 2 + r.sentence_id.size() + 4 + 8;
  }

  std::vector<unsigned char> out;
  out.insert(out.end(), std::begin(kStoreMagic), std::end(kStoreMagic));
  put_le<std::uint16_t>(out, kStoreVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put_le<std::uint64_t>(out, records.size());

  std::uint64_t offset = kStoreHeaderSize + index_size;
  for (const auto& r : records) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.sentence_id.size()));
    out.insert(out.end(), r.sentence_id.begin(), r.sentence_id.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.token_count()));
    put_le<std::uint64_t>(out, offset);
    offset += static_cast<std::uint64_t>(r.token_count()) * dim * 4;
  }
  for (const auto& r : records) {
    for (Eigen::Index i = 0; i < r.vectors.rows(); ++i) {
      for (Eigen::Index j = 0; j < r.vectors.cols(); ++j) {
        const auto f = static_cast<float>(r.vectors(i, j));
        if (!std::isfinite(f)) {
          throw PreconditionError("record '" + r.sentence_id + "' has a value that is not a finite float32");
        }
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
      }
    }
  }
  return out;
}

void store_write(const std::filesystem::path& path, std::span<const EmbeddingMatrix> records,
                 std::size_t dim) {
  const auto bytes = encode_store(records, dim);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

EmbeddingStore EmbeddingStore::open(const std::filesystem::path& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) throw IoError("cannot open embedding store " + path.string());
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw IoError("cannot stat embedding store " + path.string());
  }
  EmbeddingStore store;
  store.path_ = path;
  store.file_size_ = static_cast<std::size_t>(st.st_size);
  if (store.file_size_ > 0) {
    void* p = ::mmap(nullptr, store.file_size_, PROT_READ, MAP_PRIVATE, fd, 0);
    ::close(fd);
    if (p == MAP_FAILED) throw IoError("cannot map embedding store " + path.string());
    store.data_ = static_cast<const unsigned char*>(p);
  } else {
    ::close(fd);
  }

  const unsigned char* d = store.data_;
  const std::size_t size = store.file_size_;
  if (size < kStoreHeaderSize || std::memcmp(d, kStoreMagic, 4) != 0) {
    throw FormatError(path.string() + ": not an embedding store (bad magic)");
  }
  const auto version = get_le<std::uint16_t>(d + 4);
  if (version != kStoreVersion) {
    throw FormatError(path.string() + ": unsupported store version " + std::to_string(version));
  }
  store.dim_ = get_le<std::uint32_t>(d + 6);
  if (store.dim_ == 0) throw FormatError(path.string() + ": store dim is 0");
  const auto count = get_le<std::uint64_t>(d + 10);

  std::size_t pos = kStoreHeaderSize;
  const std::uint64_t row_bytes = static_cast<std::uint64_t>(store.dim_) * 4;
  for (std::uint64_t i = 0; i < count; ++i) {
    auto corrupt = [&](const std::string& what, const std::string& id) {
      return CorruptionError(path.string() + ": record #" + std::to_string(i) +
                             (id.empty() ? "" : " ('" + id + "')") + ": " + what);
    };
    if (pos + 2 > size) throw corrupt("index entry truncated", "");
    const auto id_len = get_le<std::uint16_t>(d + pos);
    pos += 2;
    if (pos + id_len + 12 > size) throw corrupt("index entry truncated", "");
    StoreEntry e;
    e.sentence_id.assign(reinterpret_cast<const char*>(d + pos), id_len);
    pos += id_len;
    e.token_count = get_le<std::uint32_t>(d + pos);
    e.byte_offset = get_le<std::uint64_t>(d + pos + 4);
    pos += 12;
    if (e.byte_offset > size || e.token_count > (size - e.byte_offset) / row_bytes) {
      throw corrupt("data extends past end of file", e.sentence_id);
    }
    if (!store.by_id_.emplace(e.sentence_id, store.entries_.size()).second) {
      throw corrupt("duplicate sentence id", e.sentence_id);
    }
    store.entries_.push_back(std::move(e));
  }
  return store;
}

EmbeddingStore::EmbeddingStore(EmbeddingStore&& other) noexcept
    : path_(std::move(other.path_)),
      dim_(other.dim_),
      entries_(std::move(other.entries_)),
      by_id_(std::move(other.by_id_)),
      data_(std::exchange(other.data_, nullptr)),
      file_size_(std::exchange(other.file_size_, 0)) {}

EmbeddingStore& EmbeddingStore::operator=(EmbeddingStore&& other) noexcept {
  if (this != &other) {
    if (data_) ::munmap(const_cast<unsigned char*>(data_), file_size_);
    path_ = std::move(other.path_);
    dim_ = other.dim_;
    entries_ = std::move(other.entries_);
    by_id_ = std::move(other.by_id_);
    data_ = std::exchange(other.data_, nullptr);
    file_size_ = std::exchange(other.file_size_, 0);
  }
  return *this;
}

EmbeddingStore::~EmbeddingStore() {
  if (data_) ::munmap(const_cast<unsigned char*>(data_), file_size_);
}

const StoreEntry* EmbeddingStore::find(std::string_view sentence_id) const {
  auto it = by_id_.find(std::string(sentence_id));
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

EmbeddingMatrix EmbeddingStore::lookup(std::string_view sentence_id) const {
  const StoreEntry* e = find(sentence_id);
  if (!e) {
    throw MissingEmbeddingError("no embeddings for sentence '" + std::string(sentence_id) + "' in " +
                                path_.string());
  }
  EmbeddingMatrix m{e->sentence_id, RowMatrix(e->token_count, dim_)};
  const unsigned char* p = data_ + e->byte_offset;
  for (std::uint32_t i = 0; i < e->token_count; ++i) {
    for (std::size_t j = 0; j < dim_; ++j, p += 4) {
      m.vectors(i, j) = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
    }
  }
  return m;
}

EmbeddingStore store_read(const std::filesystem::path& path) { return EmbeddingStore::open(path); }

std::vector<std::string> check_store_alignment(const EmbeddingStore& store, const Corpus& corpus) {
  std::vector<std::string> problems;
  for (const auto& s : corpus.sentences()) {
    const StoreEntry* e = store.find(s.id);
    if (!e) {
      problems.push_back("missing: sentence '" + s.id + "'");
    } else if (e->token_count != s.size()) {
      problems.push_back("alignment: sentence '" + s.id + "' has " + std::to_string(s.size()) +
                         " tokens, store has " + std::to_string(e->token_count));
    }
  }
  return problems;
}

}  // namespace fewie
