#include "idistill/encoder.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "idistill/errors.hpp"

namespace idistill::encoder {

namespace {

constexpr std::array<char, 4> kMagic = {'I', 'D', 'S', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint32_t crc32(std::span<const unsigned char> data) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int j = 0; j < 8; ++j) {
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      }
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (unsigned char b : data) {
    crc = table[(crc ^ b) & 0xFFu] ^ (crc >> 8);
  }
  return crc ^ 0xFFFFFFFFu;
}

template <typename T>
void write_le(std::ostream& os, T value) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu);
  }
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw FormatError("checkpoint truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

EncoderModel init_model(std::uint32_t dim, std::uint32_t vocab_buckets,
                        std::uint64_t seed, Role role) {
  if (dim < 2) throw InvalidArgument("encoder dim must be >= 2");
  if (vocab_buckets < 16) throw InvalidArgument("vocab_buckets must be >= 16");
  EncoderModel model;
  model.role = role;
  model.dim = dim;
  model.vocab_buckets = vocab_buckets;
  model.table.resize(static_cast<std::size_t>(dim) * vocab_buckets);
  std::mt19937_64 rng(seed);
  // Not uniform_real_distribution: this mapping is pinned so checkpoints are
  // reproducible across standard library implementations.
  for (double& w : model.table) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
    w = (u - 0.5) * 0.1;
  }
  return model;
}

TokenSequence tokenize(std::string_view text, std::size_t max_len,
                       std::uint32_t vocab_buckets) {
  if (vocab_buckets < 16) throw InvalidArgument("vocab_buckets must be >= 16");
  TokenSequence out;
  std::string token;
  auto flush = [&] {
    if (!token.empty() && out.size() < max_len) {
      out.ids.push_back(
          static_cast<std::uint32_t>(fnv1a64(token) % vocab_buckets));
    }
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
    if (out.size() >= max_len) break;
  }
  flush();
  if (out.empty()) {
    throw EmptyInputError("tokenize: no tokens in input text");
  }
  return out;
}

std::vector<double> encode(const EncoderModel& model,
                           const TokenSequence& tokens) {
  if (tokens.empty()) throw EmptyInputError("encode: empty token sequence");
  std::vector<double> pooled(model.dim, 0.0);
  for (std::uint32_t id : tokens.ids) {
    auto r = model.row(id);
    for (std::uint32_t d = 0; d < model.dim; ++d) pooled[d] += r[d];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& x : pooled) x *= inv;
  return pooled;
}

double score_pair(const EncoderModel& model, const TokenSequence& query,
                  const TokenSequence& doc) {
  const auto q = encode(model, query);
  const auto d = encode(model, doc);
  double s = 0.0;
  for (std::uint32_t i = 0; i < model.dim; ++i) s += q[i] * d[i];
  return s;
}

void backward_scores(const EncoderModel& model, const TokenSequence& query,
                     const std::vector<TokenSequence>& candidates,
                     std::span<const double> upstream,
                     std::span<double> grad_out) {
  if (upstream.size() != candidates.size()) {
    throw InvalidArgument("upstream gradient length != candidate count");
  }
  if (grad_out.size() != model.table.size()) {
    throw InvalidArgument("gradient buffer is not table-shaped");
  }
  const auto q_emb = encode(model, query);
  const double inv_q = 1.0 / static_cast<double>(query.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double u = upstream[i];
    if (u == 0.0) continue;
    const auto& doc = candidates[i];
    const auto d_emb = encode(model, doc);
    const double inv_d = 1.0 / static_cast<double>(doc.size());
    // score = q_emb . d_emb; both towers share the table.
    for (std::uint32_t id : query.ids) {
      double* g = grad_out.data() + static_cast<std::size_t>(id) * model.dim;
      for (std::uint32_t d = 0; d < model.dim; ++d) {
        g[d] += u * inv_q * d_emb[d];
      }
    }
    for (std::uint32_t id : doc.ids) {
      double* g = grad_out.data() + static_cast<std::size_t>(id) * model.dim;
      for (std::uint32_t d = 0; d < model.dim; ++d) {
        g[d] += u * inv_d * q_emb[d];
      }
    }
  }
}

void save_model(const EncoderModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(os, kFormatVersion);
  os.put(static_cast<char>(model.role));
  write_le<std::uint32_t>(os, model.dim);
  write_le<std::uint32_t>(os, model.vocab_buckets);
  std::vector<unsigned char> payload(model.table.size() * 8);
  for (std::size_t i = 0; i < model.table.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &model.table[i], 8);
    for (int b = 0; b < 8; ++b) {
      payload[i * 8 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu);
    }
  }
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size()));
  write_le<std::uint32_t>(os, crc32(payload));
  if (!os) throw IoError("checkpoint write failed: " + path.string());
}

EncoderModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) {
    throw FormatError("checkpoint has wrong magic bytes: " + path.string());
  }
  const auto version = read_le<std::uint32_t>(is);
  if (version != kFormatVersion) {
    throw FormatError("unsupported checkpoint format version " +
                      std::to_string(version));
  }
  const int role_byte = is.get();
  if (role_byte != 0 && role_byte != 1) {
    throw FormatError("checkpoint has invalid role byte");
  }
  EncoderModel model;
  model.role = static_cast<Role>(role_byte);
  model.dim = read_le<std::uint32_t>(is);
  model.vocab_buckets = read_le<std::uint32_t>(is);
  if (model.dim < 2 || model.vocab_buckets < 16) {
    throw FormatError("checkpoint header has invalid dimensions");
  }
  const std::size_t n =
      static_cast<std::size_t>(model.dim) * model.vocab_buckets;
  std::vector<unsigned char> payload(n * 8);
  is.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size()));
  if (static_cast<std::size_t>(is.gcount()) != payload.size()) {
    throw FormatError("checkpoint payload size does not match header");
  }
  const auto stored_crc = read_le<std::uint32_t>(is);
  if (stored_crc != crc32(payload)) {
    throw FormatError("checkpoint payload CRC mismatch");
  }
  model.table.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(payload[i * 8 + b]) << (8 * b);
    }
    std::memcpy(&model.table[i], &bits, 8);
  }
  return model;
}

}  // namespace idistill::encoder
