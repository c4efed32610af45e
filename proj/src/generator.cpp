#include "cggan/generator.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

namespace cggan {

namespace {

double activate(Activation a, double v) {
  switch (a) {
    case Activation::Identity: return v;
    case Activation::Tanh: return std::tanh(v);
    case Activation::Relu: return v > 0.0 ? v : 0.0;
    case Activation::LeakyRelu: return v > 0.0 ? v : kLeakySlope * v;
  }
  return v;
}

// Derivative given the pre-activation and the activated value.
double derivative(Activation a, double pre, double post) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Tanh: return 1.0 - post * post;
    case Activation::Relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::LeakyRelu: return pre > 0.0 ? 1.0 : kLeakySlope;
  }
  return 1.0;
}

struct Tape {
  std::vector<Vector> pre;   // per layer
  std::vector<Vector> post;  // per layer
};

Tape record(const std::vector<DenseLayer>& layers, const Vector& x) {
  Tape tape;
  tape.pre.reserve(layers.size());
  tape.post.reserve(layers.size());
  const Vector* input = &x;
  for (const auto& layer : layers) {
    Vector pre = layer.weight * *input + layer.bias;
    Vector post = pre.unaryExpr([&](double v) { return activate(layer.activation, v); });
    tape.pre.push_back(std::move(pre));
    tape.post.push_back(std::move(post));
    input = &tape.post.back();
  }
  return tape;
}

Vector local_slopes(const DenseLayer& layer, const Vector& pre, const Vector& post) {
  Vector s(pre.size());
  for (Eigen::Index i = 0; i < pre.size(); ++i) s(i) = derivative(layer.activation, pre(i), post(i));
  return s;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> dec(m);
  return dec.singularValues()(0);
}

}  // namespace

GeneratorNetwork::GeneratorNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidInput("GeneratorNetwork: at least one layer is required");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weight.rows())
      throw InvalidInput("GeneratorNetwork: bias length must equal weight rows");
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
      throw InvalidInput("GeneratorNetwork: layer dimensions do not chain");
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw InvalidInput("GeneratorNetwork: non-finite weights");
  }
}

Eigen::Index GeneratorNetwork::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().weight.cols();
}

Eigen::Index GeneratorNetwork::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().weight.rows();
}

Vector GeneratorNetwork::forward(const Vector& x) const {
  if (x.size() != input_dim()) throw InvalidInput("forward: latent vector has wrong length");
  Vector h = x;
  for (const auto& layer : layers_) {
    Vector pre = layer.weight * h + layer.bias;
    h = pre.unaryExpr([&](double v) { return activate(layer.activation, v); });
  }
  return h;
}

Vector GeneratorNetwork::vjp(const Vector& x, const Vector& w) const {
  if (x.size() != input_dim()) throw InvalidInput("vjp: latent vector has wrong length");
  if (w.size() != output_dim()) throw InvalidInput("vjp: cotangent has wrong length");
  const Tape tape = record(layers_, x);
  Vector g = w;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = g.cwiseProduct(local_slopes(layers_[i], tape.pre[i], tape.post[i]));
    g = layers_[i].weight.transpose() * g;
  }
  return g;
}

Vector GeneratorNetwork::jvp(const Vector& x, const Vector& v) const {
  if (x.size() != input_dim()) throw InvalidInput("jvp: latent vector has wrong length");
  if (v.size() != input_dim()) throw InvalidInput("jvp: tangent has wrong length");
  const Tape tape = record(layers_, x);
  Vector t = v;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    t = layers_[i].weight * t;
    t = t.cwiseProduct(local_slopes(layers_[i], tape.pre[i], tape.post[i]));
  }
  return t;
}

double GeneratorNetwork::spectral_norm_product() const {
  double p = 1.0;
  for (const auto& l : layers_) p *= spectral_norm(l.weight);
  return p;
}

ScaleBasisGenerator::ScaleBasisGenerator(GeneratorNetwork base, bool range_shift,
                                         std::optional<Matrix> basis)
    : base_(std::move(base)), range_shift_(range_shift), basis_(std::move(basis)) {
  if (basis_ && (basis_->cols() != base_.output_dim() || basis_->rows() != basis_->cols()))
    throw InvalidInput("ScaleBasisGenerator: basis must be square and match the network output");
}

Vector ScaleBasisGenerator::forward(const Vector& x) const {
  Vector g = base_.forward(x);
  if (range_shift_) g = (g.array() + 1.0) * 0.5;
  if (basis_) g = *basis_ * g;
  return g;
}

Vector ScaleBasisGenerator::vjp(const Vector& x, const Vector& w) const {
  if (w.size() != output_dim()) throw InvalidInput("vjp: cotangent has wrong length");
  Vector back = basis_ ? Vector(basis_->transpose() * w) : w;
  if (range_shift_) back *= 0.5;
  return base_.vjp(x, back);
}

Vector ScaleBasisGenerator::jvp(const Vector& x, const Vector& v) const {
  Vector t = base_.jvp(x, v);
  if (range_shift_) t *= 0.5;
  if (basis_) t = *basis_ * t;
  return t;
}

double ScaleBasisGenerator::lipschitz_bound() const {
  double b = base_.spectral_norm_product();
  if (range_shift_) b *= 0.5;
  if (basis_) b *= spectral_norm(*basis_);
  return b;
}

GeneratorAssumptionEstimate estimate_assumption_constants(const ScaleBasisGenerator& g,
                                                          std::size_t pair_count, double radius,
                                                          std::uint64_t seed) {
  if (pair_count < 2) throw InvalidInput("estimate_assumption_constants: need at least 2 pairs");
  if (!(radius > 0.0)) throw InvalidInput("estimate_assumption_constants: radius must be positive");
  const Eigen::Index d = g.input_dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto draw = [&] {
    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = normal(rng);
    const double r = radius * std::pow(uniform(rng), 1.0 / static_cast<double>(d));
    return Vector(v * (r / v.norm()));
  };

  GeneratorAssumptionEstimate est;
  est.nu_G = std::numeric_limits<double>::infinity();
  est.sample_count = 0;
  est.sampling_radius = radius;
  for (std::size_t p = 0; p < pair_count; ++p) {
    const Vector xa = draw();
    const Vector xb = draw();
    const Vector dx = xa - xb;
    const double dn = dx.norm();
    if (dn == 0.0) continue;
    const Vector ga = g.forward(xa);
    const Vector gb = g.forward(xb);
    const double ratio = (ga - gb).norm() / dn;
    const double remainder = (ga - gb - g.jvp(xb, dx)).norm();
    est.nu_G = std::min(est.nu_G, ratio);
    est.tau_G = std::max(est.tau_G, ratio);
    est.L_G = std::max(est.L_G, 2.0 * remainder / (dn * dn));
    ++est.sample_count;
  }
  if (est.sample_count == 0) est.nu_G = 0.0;
  return est;
}

GeneratorNetwork make_random_network(const std::vector<Eigen::Index>& dims, Activation hidden,
                                     Activation output, double spectral_norm_target,
                                     std::uint64_t seed, double bias_scale) {
  if (dims.size() < 2) throw InvalidInput("make_random_network: need at least input and output dims");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] < 1 || dims[i + 1] < 1) throw InvalidInput("make_random_network: dims must be positive");
    DenseLayer l;
    l.weight = Matrix(dims[i + 1], dims[i]);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = normal(rng);
    l.weight *= spectral_norm_target / spectral_norm(l.weight);
    l.bias = Vector(dims[i + 1]);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = bias_scale * normal(rng);
    l.activation = i + 2 == dims.size() ? output : hidden;
    layers.push_back(std::move(l));
  }
  return GeneratorNetwork(std::move(layers));
}

// ---- weight file ---------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic{'C', 'G', 'G', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::string& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class Reader {
public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  void need(std::size_t count, const char* what) const {
    if (bytes_.size() - pos_ < count)
      throw FormatError(std::string("truncated weight file: expected ") + what, pos_);
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f32(const char* what) { return static_cast<double>(std::bit_cast<float>(u32(what))); }

  std::string_view take(std::size_t count, const char* what) {
    need(count, what);
    std::string_view v(bytes_.data() + pos_, count);
    pos_ += count;
    return v;
  }

private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_weights(const GeneratorNetwork& g, const std::filesystem::path& path) {
  std::string out(kMagic.begin(), kMagic.end());
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(g.layers().size()));
  for (const auto& l : g.layers()) {
    put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
    put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
    out.push_back(static_cast<char>(l.activation));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) put_f32(out, l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) put_f32(out, l.bias(r));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("save_weights: cannot open " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("save_weights: write failed for " + path.string());
}

GeneratorNetwork load_weights(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_weights: cannot open " + path.string());
  Reader in(std::string(std::istreambuf_iterator<char>(f), {}));

  if (in.take(4, "magic") != std::string_view(kMagic.data(), 4))
    throw FormatError("bad magic, expected CGGN", 0);
  const std::size_t version_at = in.offset();
  if (const auto version = in.u32("format version"); version != kFormatVersion)
    throw FormatError("unsupported format version " + std::to_string(version), version_at);
  const std::size_t count_at = in.offset();
  const std::uint32_t count = in.u32("layer count");
  if (count == 0) throw FormatError("layer count is zero", count_at);

  std::vector<DenseLayer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t header_at = in.offset();
    const std::uint32_t rows = in.u32("layer rows");
    const std::uint32_t cols = in.u32("layer cols");
    if (rows == 0 || cols == 0) throw FormatError("layer with zero dimension", header_at);
    if (!layers.empty() && static_cast<Eigen::Index>(cols) != layers.back().weight.rows())
      throw FormatError("layer " + std::to_string(i) + " input size does not match previous output",
                        header_at);
    const std::size_t tag_at = in.offset();
    const std::uint8_t tag = in.u8("activation tag");
    if (tag > 3) throw FormatError("unknown activation tag " + std::to_string(tag), tag_at);
    in.need((static_cast<std::size_t>(rows) * cols + rows) * 4, "layer payload");
    DenseLayer l;
    l.activation = static_cast<Activation>(tag);
    l.weight = Matrix(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) l.weight(r, c) = in.f32("weight");
    l.bias = Vector(rows);
    for (std::uint32_t r = 0; r < rows; ++r) l.bias(r) = in.f32("bias");
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw FormatError("non-finite weights in layer " + std::to_string(i), header_at);
    layers.push_back(std::move(l));
  }
  if (!in.at_end()) throw FormatError("trailing bytes after last layer", in.offset());
  return GeneratorNetwork(std::move(layers));
}

// ---- reference vectors ---------------------------------------------------

std::vector<ReferencePair> load_reference_vectors(const std::filesystem::path& path,
                                                  Eigen::Index input_dim, Eigen::Index output_dim) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_reference_vectors: cannot open " + path.string());
  std::vector<ReferencePair> pairs;
  std::string line;
  std::size_t offset = 0;
  bool header = true;
  while (std::getline(f, line)) {
    const std::size_t line_at = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.find_first_not_of("0123456789+-.eE, ") != std::string::npos) continue;
    }
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw FormatError("non-numeric reference value '" + cell + "'", line_at);
      }
    }
    if (static_cast<Eigen::Index>(values.size()) != input_dim + output_dim)
      throw FormatError("reference row has " + std::to_string(values.size()) + " values, expected " +
                            std::to_string(input_dim + output_dim),
                        line_at);
    ReferencePair p;
    p.input = Eigen::Map<Vector>(values.data(), input_dim);
    p.output = Eigen::Map<Vector>(values.data() + input_dim, output_dim);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_reference_vectors(const std::vector<ReferencePair>& pairs,
                            const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("save_reference_vectors: cannot open " + path.string());
  if (pairs.empty()) return;
  const Eigen::Index d = pairs.front().input.size();
  const Eigen::Index n = pairs.front().output.size();
  for (Eigen::Index i = 0; i < d; ++i) f << (i ? "," : "") << "x" << i;
  for (Eigen::Index i = 0; i < n; ++i) f << ",g" << i;
  f << '\n' << std::setprecision(9);
  for (const auto& p : pairs) {
    for (Eigen::Index i = 0; i < d; ++i) f << (i ? "," : "") << p.input(i);
    for (Eigen::Index i = 0; i < n; ++i) f << ',' << p.output(i);
    f << '\n';
  }
}

double max_reference_error(const GeneratorNetwork& g, const std::vector<ReferencePair>& pairs) {
  double worst = 0.0;
  for (const auto& p : pairs) {
    const Vector out = g.forward(p.input);
    for (Eigen::Index i = 0; i < out.size(); ++i)
      worst = std::max(worst, std::abs(out(i) - p.output(i)) / std::max(1.0, std::abs(p.output(i))));
  }
  return worst;
}

}  // namespace cggan
