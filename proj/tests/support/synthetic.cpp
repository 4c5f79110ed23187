#include "synthetic.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fewie/rng.hpp"

namespace fewie::testing {

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  const auto base = std::filesystem::temp_directory_path();
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = base / (tag + "-" + std::to_string(rd()) + std::to_string(attempt));
    if (std::filesystem::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string class_name(std::size_t c) { return "C" + std::to_string(c); }

Corpus make_balanced_corpus(const BalancedCorpusOptions& options) {
  CounterRng rng(options.seed);
  std::vector<Sentence> sentences;
  std::size_t id = 0;
  for (std::size_t i = 0; i < options.sentences_per_class; ++i) {
    for (std::size_t c = 0; c < options.n_classes; ++c) {
      Sentence s;
      s.id = "syn:" + std::to_string(id);
      const std::size_t before = rng.uniform_below(3);
      const std::size_t after = rng.uniform_below(3);
      const std::size_t len = 1 + c % options.max_mention_len;
      std::size_t t = 0;
      auto push = [&](std::string tag) {
        s.tokens.push_back("w" + std::to_string(id) + "_" + std::to_string(t++));
        s.tags.push_back(std::move(tag));
      };
      for (std::size_t k = 0; k < before; ++k) push("O");
      for (std::size_t k = 0; k < len; ++k) push((k == 0 ? "B-" : "I-") + class_name(c));
      for (std::size_t k = 0; k < after; ++k) push("O");
      sentences.push_back(std::move(s));
      ++id;
    }
  }
  return Corpus::build(std::move(sentences), TagScheme::kBIO);
}

Corpus make_random_corpus(std::uint64_t seed, std::size_t n_sentences) {
  CounterRng rng(mix64(seed));
  const std::size_t n_classes = 3 + rng.uniform_below(6);
  std::vector<Sentence> sentences;
  for (std::size_t i = 0; i < n_sentences; ++i) {
    Sentence s;
    s.id = "r" + std::to_string(seed) + ":" + std::to_string(i);
    const std::size_t mentions = rng.uniform_below(4);
    std::size_t t = 0;
    auto push = [&](std::string tag) {
      s.tokens.push_back("t" + std::to_string(rng.uniform_below(50)));
      s.tags.push_back(std::move(tag));
      ++t;
    };
    for (std::size_t m = 0; m < mentions; ++m) {
      const std::size_t gap = (m == 0 ? 0 : 1) + rng.uniform_below(3);
      for (std::size_t k = 0; k < gap; ++k) push("O");
      const std::string type = class_name(rng.uniform_below(n_classes));
      const std::size_t len = 1 + rng.uniform_below(3);
      for (std::size_t k = 0; k < len; ++k) push((k == 0 ? "B-" : "I-") + type);
    }
    const std::size_t tail = mentions == 0 ? 1 + rng.uniform_below(4) : rng.uniform_below(3);
    for (std::size_t k = 0; k < tail; ++k) push("O");
    sentences.push_back(std::move(s));
  }
  return Corpus::build(std::move(sentences), TagScheme::kBIO);
}

std::vector<EmbeddingMatrix> make_clustered_embeddings(const Corpus& corpus, std::size_t dim, double noise,
                                                       std::uint64_t seed) {
  auto center = [&](const std::string& type) {
    CounterRng rng(mix64(seed ^ fnv1a64(type)));
    Eigen::RowVectorXd v(dim);
    for (std::size_t j = 0; j < dim; ++j) v[j] = rng.normal();
    return Eigen::RowVectorXd(v / v.norm());
  };
  const double scale = noise / std::sqrt(static_cast<double>(dim));
  std::vector<EmbeddingMatrix> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Sentence& s = corpus.sentences()[i];
    CounterRng rng = CounterRng::child(seed + 1, i);
    EmbeddingMatrix m{s.id, RowMatrix::Zero(s.size(), dim)};
    for (const auto& mention : extract_mentions(s, corpus.scheme())) {
      const auto c = center(mention.entity_type);
      for (auto t = mention.span.start; t < mention.span.end; ++t) m.vectors.row(t) = c;
    }
    for (Eigen::Index t = 0; t < m.vectors.rows(); ++t) {
      for (Eigen::Index j = 0; j < m.vectors.cols(); ++j) {
        m.vectors(t, j) = static_cast<double>(static_cast<float>(m.vectors(t, j) + scale * rng.normal()));
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<EmbeddingMatrix> make_anisotropic_embeddings(const Corpus& corpus, std::size_t dim, double noise,
                                                         std::size_t n_directions, double scale,
                                                         std::uint64_t seed) {
  auto out = make_clustered_embeddings(corpus, dim, noise, seed);
  CounterRng dir_rng(mix64(seed ^ 0x5EED));
  std::vector<Eigen::RowVectorXd> dirs;
  for (std::size_t k = 0; k < n_directions; ++k) {
    Eigen::RowVectorXd v(dim);
    for (std::size_t j = 0; j < dim; ++j) v[j] = dir_rng.normal();
    dirs.push_back(v / v.norm());
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    CounterRng rng = CounterRng::child(seed + 2, i);
    auto& m = out[i].vectors;
    for (Eigen::Index t = 0; t < m.rows(); ++t) {
      for (const auto& u : dirs) m.row(t) += scale * rng.normal() * u;
    }
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<double>(static_cast<float>(m.data()[k]));
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace fewie::testing
