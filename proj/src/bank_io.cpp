// Bank file layout, all integers and floats little-endian:
//
//   "DLSTF\0"                      6-byte magic
//   u32 format_version             currently 1
//   u32 h, u32 ell, u32 n
//   n x (f64 min, f64 max)         normalizer, station order
//   per model M_1..M_h:
//     u32 layer_count
//     per layer: u32 input_dim, u32 hidden_dim,
//                W_f W_i W_k W_o U_f U_i U_k U_o b_f b_i b_k b_o (f64, row-major)
//     head matrix (n x top hidden), head bias (n)
//   u64 total number of f64 values written above

#include <bit>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "dlstf/horizon.hpp"

namespace dlstf {

namespace {

constexpr char kMagic[6] = {'D', 'L', 'S', 'T', 'F', '\0'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) {
    put(std::bit_cast<std::uint64_t>(v), 8);
    ++f64_count_;
  }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }
  void raw(std::string_view s) { out_.append(s); }

  std::uint64_t f64_count() const { return f64_count_; }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int b = 0; b < bytes; ++b) out_.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
  std::string out_;
  std::uint64_t f64_count_ = 0;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }
  std::uint64_t u64(const char* what) { return get(8, what); }
  double f64(const char* what) {
    ++f64_count_;
    return std::bit_cast<double>(get(8, what));
  }
  void f64s(std::span<double> out, const char* what) {
    require(out.size() * 8, what);
    for (double& v : out) v = f64(what);
  }
  std::string_view raw(std::size_t len, const char* what) {
    require(len, what);
    auto s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::uint64_t f64_count() const { return f64_count_; }

  void require(std::size_t len, const char* what) const {
    if (len > remaining()) {
      throw BankFormatError("truncated bank file: need " + std::to_string(len) +
                            " bytes for " + what + " at offset " + std::to_string(pos_) +
                            ", only " + std::to_string(remaining()) + " left");
    }
  }

 private:
  std::uint64_t get(int bytes, const char* what) {
    require(static_cast<std::size_t>(bytes), what);
    std::uint64_t v = 0;
    for (int b = 0; b < bytes; ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::uint64_t f64_count_ = 0;
};

std::uint32_t narrow(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw BankFormatError(std::string(what) + " does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

void check_dims(Reader& in, std::size_t rows, std::size_t cols, const char* what) {
  // Reject absurd headers before allocating.
  if (cols != 0 && rows > in.remaining() / 8 / cols) {
    throw BankFormatError(std::string("truncated bank file: ") + what + " needs " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          " values, only " + std::to_string(in.remaining()) + " bytes left");
  }
}

}  // namespace

std::string encode_bank(const ModelBank& bank) {
  bank.validate();
  if (bank.config.gate_activation != ActivationKind::Sigmoid ||
      bank.config.head_activation != ActivationKind::Identity) {
    throw BankFormatError("bank format version 1 stores sigmoid gates and an identity head only");
  }
  Writer w;
  w.raw(std::string_view(kMagic, sizeof kMagic));
  w.u32(kBankFormatVersion);
  w.u32(narrow(bank.config.h, "h"));
  w.u32(narrow(bank.config.ell, "ell"));
  w.u32(narrow(bank.config.n, "n"));
  for (std::size_t s = 0; s < bank.config.n; ++s) {
    w.f64(bank.normalizer.min[s]);
    w.f64(bank.normalizer.max[s]);
  }
  for (const auto& model : bank.models) {
    w.u32(narrow(model.layers.size(), "layer count"));
    for (const auto& layer : model.layers) {
      w.u32(narrow(layer.input_dim, "input_dim"));
      w.u32(narrow(layer.hidden_dim, "hidden_dim"));
      layer.for_each_block([&](std::span<const double> s) { w.f64s(s); });
    }
    w.f64s(model.head_weights.span());
    w.f64s(model.head_bias.span());
  }
  w.u64(w.f64_count());
  return w.take();
}

ModelBank decode_bank(std::string_view bytes) {
  Reader in(bytes);
  const auto magic = in.raw(sizeof kMagic, "magic");
  if (magic != std::string_view(kMagic, sizeof kMagic)) {
    std::string found;
    for (char c : magic) {
      found += (c >= 0x20 && c < 0x7f) ? std::string(1, c) : "\\" + std::to_string(int(c));
    }
    throw BankFormatError("bad magic: expected 'DLSTF\\0', found '" + found + "'");
  }
  const auto version = in.u32("format_version");
  if (version != kBankFormatVersion) {
    throw BankFormatError("unsupported bank format version: expected " +
                          std::to_string(kBankFormatVersion) + ", found " +
                          std::to_string(version));
  }

  ModelBank bank;
  bank.format_version = version;
  const std::size_t h = in.u32("h");
  const std::size_t ell = in.u32("ell");
  const std::size_t n = in.u32("n");
  if (h == 0 || ell == 0 || n == 0) {
    throw BankFormatError("bank header has zero h, ell or n");
  }
  check_dims(in, n, 2, "normalizer");
  bank.normalizer.min.resize(n);
  bank.normalizer.max.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    bank.normalizer.min[s] = in.f64("normalizer");
    bank.normalizer.max[s] = in.f64("normalizer");
  }

  std::vector<std::vector<std::size_t>> widths;
  for (std::size_t i = 1; i <= h; ++i) {
    LstmNetwork net;
    const std::size_t layers = in.u32("layer count");
    if (layers == 0) throw BankFormatError("model " + std::to_string(i) + " has no layers");
    std::size_t expected_in = n;
    for (std::size_t j = 0; j < layers; ++j) {
      const std::size_t input_dim = in.u32("input_dim");
      const std::size_t hidden_dim = in.u32("hidden_dim");
      if (input_dim != expected_in || hidden_dim == 0) {
        throw BankFormatError("model " + std::to_string(i) + " layer " + std::to_string(j) +
                              " has dimensions " + std::to_string(input_dim) + "->" +
                              std::to_string(hidden_dim) + ", expected input " +
                              std::to_string(expected_in));
      }
      check_dims(in, 4 * hidden_dim, input_dim + hidden_dim + 1, "layer parameters");
      LstmLayerParams layer(input_dim, hidden_dim);
      layer.for_each_block([&](std::span<double> s) { in.f64s(s, "layer parameters"); });
      net.layers.push_back(std::move(layer));
      expected_in = hidden_dim;
    }
    check_dims(in, n, expected_in + 1, "head");
    net.head_weights = Matrix(n, expected_in);
    net.head_bias = Vector(n);
    in.f64s(net.head_weights.span(), "head weights");
    in.f64s(net.head_bias.span(), "head bias");
    widths.push_back(net.layer_widths());
    bank.models.push_back(std::move(net));
  }

  const std::uint64_t read_count = in.f64_count();
  if (in.remaining() != 8) {
    throw BankFormatError("payload length mismatch: header dimensions imply " +
                          std::to_string(read_count) + " f64 values followed by an 8-byte "
                          "trailer, but " + std::to_string(in.remaining()) + " bytes remain");
  }
  const std::uint64_t recorded = in.u64("trailer");
  if (recorded != read_count) {
    throw BankFormatError("payload length mismatch: header dimensions imply " +
                          std::to_string(read_count) + " f64 values, trailer records " +
                          std::to_string(recorded));
  }

  bank.config = make_horizon_config(n, h, ell, TrainConfig{}, std::move(widths));
  bank.validate();
  return bank;
}

void save_bank(const ModelBank& bank, const std::filesystem::path& path) {
  const std::string bytes = encode_bank(bank);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write bank file '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for bank file '" + path.string() + "'");
}

ModelBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open bank file '" + path.string() + "'");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_bank(bytes);
}

}  // namespace dlstf
