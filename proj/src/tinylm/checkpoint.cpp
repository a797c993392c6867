#include <bit>
#include <cstring>

#include "jpo/error.hpp"
#include "jpo/tinylm.hpp"
#include "jpo/util.hpp"

namespace jpo::lm {

namespace {

// Layout (little-endian):
//   "JPOLMCKP" | u32 version | u32 n_symbols | n x (u32 len, bytes)
//   | u64 max_segment_position | u64 seed | u64 n_params | n_params x f64
constexpr char kMagic[8] = {'J', 'P', 'O', 'L', 'M', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(Errc::CheckpointFormat, "truncated checkpoint");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const PolicyModel& model) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const auto& symbols = model.vocab().symbols();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(symbols.size()));
  for (const auto& s : symbols) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out += s;
  }
  put<std::uint64_t>(out, model.architecture().max_segment_position);
  put<std::uint64_t>(out, model.seed());
  const auto params = model.parameters();
  put<std::uint64_t>(out, params.size());
  out.append(reinterpret_cast<const char*>(params.data()), params.size() * sizeof(double));
  return out;
}

PolicyModel deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
    throw Error(Errc::CheckpointFormat, "not a model checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw Error(Errc::CheckpointFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto n_symbols = r.get<std::uint32_t>();
  std::vector<std::string> symbols;
  for (std::uint32_t i = 0; i < n_symbols; ++i) {
    const auto len = r.get<std::uint32_t>();
    symbols.emplace_back(r.take(len));
  }
  if (n_symbols < 3 || symbols[Vocabulary::kBos] != Vocabulary::kBosSymbol ||
      symbols[Vocabulary::kEos] != Vocabulary::kEosSymbol ||
      symbols[Vocabulary::kSep] != Vocabulary::kSepSymbol) {
    throw Error(Errc::CheckpointFormat, "checkpoint vocabulary lacks reserved symbols");
  }
  Architecture arch;
  arch.max_segment_position = r.get<std::uint64_t>();
  const auto seed = r.get<std::uint64_t>();
  PolicyModel model(Vocabulary(std::vector<std::string>(symbols.begin() + 3, symbols.end())), arch, seed);
  const auto n_params = r.get<std::uint64_t>();
  if (n_params != model.parameter_count()) {
    throw Error(Errc::CheckpointFormat, "parameter count does not match architecture");
  }
  auto raw = r.take(n_params * sizeof(double));
  std::memcpy(model.mutable_parameters().data(), raw.data(), raw.size());
  if (!r.done()) throw Error(Errc::CheckpointFormat, "trailing bytes in checkpoint");
  return model;
}

void save_checkpoint(const PolicyModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

PolicyModel load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace jpo::lm
