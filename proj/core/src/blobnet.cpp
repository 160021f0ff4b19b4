#include "cova/blobnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "cova/errors.hpp"
#include "json.hpp"

namespace cova {
namespace {

// Height x width x channels, channel-contiguous.
struct Tensor {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, 0.0) {}
  double* px(int y, int x) { return v.data() + (static_cast<std::size_t>(y) * w + x) * c; }
  const double* px(int y, int x) const { return v.data() + (static_cast<std::size_t>(y) * w + x) * c; }
};

struct ConvView {
  const BlobNetModel::Layer& layer;
  const double* weight;
  const double* bias;
};

ConvView view(const BlobNetModel& m, std::size_t i) {
  const auto& l = m.layers()[i];
  return ConvView{l, m.parameters().data() + l.weight_offset, m.parameters().data() + l.bias_offset};
}

Tensor conv_forward(const Tensor& in, const ConvView& cv) {
  const int k = cv.layer.kernel, pad = k / 2, cin = cv.layer.in_channels, cout = cv.layer.out_channels;
  Tensor out(in.h, in.w, cout);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      double* o = out.px(y, x);
      for (int oc = 0; oc < cout; ++oc) o[oc] = cv.bias[oc];
      for (int ky = 0; ky < k; ++ky) {
        const int yy = y + ky - pad;
        if (yy < 0 || yy >= in.h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int xx = x + kx - pad;
          if (xx < 0 || xx >= in.w) continue;
          const double* ip = in.px(yy, xx);
          for (int oc = 0; oc < cout; ++oc) {
            const double* wp = cv.weight + ((static_cast<std::size_t>(oc) * k + ky) * k + kx) * cin;
            double acc = 0.0;
            for (int ic = 0; ic < cin; ++ic) acc += wp[ic] * ip[ic];
            o[oc] += acc;
          }
        }
      }
    }
  }
  return out;
}

// Accumulates into dw/db (may be null) and returns d(loss)/d(in).
Tensor conv_backward(const Tensor& in, const Tensor& dout, const ConvView& cv, double* dw, double* db) {
  const int k = cv.layer.kernel, pad = k / 2, cin = cv.layer.in_channels, cout = cv.layer.out_channels;
  Tensor din(in.h, in.w, cin);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      const double* g = dout.px(y, x);
      if (db)
        for (int oc = 0; oc < cout; ++oc) db[oc] += g[oc];
      for (int ky = 0; ky < k; ++ky) {
        const int yy = y + ky - pad;
        if (yy < 0 || yy >= in.h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int xx = x + kx - pad;
          if (xx < 0 || xx >= in.w) continue;
          const double* ip = in.px(yy, xx);
          double* dip = din.px(yy, xx);
          for (int oc = 0; oc < cout; ++oc) {
            const double go = g[oc];
            if (go == 0.0) continue;
            const std::size_t off = ((static_cast<std::size_t>(oc) * k + ky) * k + kx) * cin;
            const double* wp = cv.weight + off;
            if (dw) {
              double* dwp = dw + off;
              for (int ic = 0; ic < cin; ++ic) dwp[ic] += go * ip[ic];
            }
            for (int ic = 0; ic < cin; ++ic) dip[ic] += go * wp[ic];
          }
        }
      }
    }
  }
  return din;
}

void leaky_inplace(Tensor& t) {
  for (double& v : t.v)
    if (v < 0.0) v *= kLeakySlope;
}

// Gradient through leaky-relu given its output (sign is preserved).
void leaky_backward(const Tensor& out, Tensor& grad) {
  for (std::size_t i = 0; i < grad.v.size(); ++i)
    if (out.v[i] < 0.0) grad.v[i] *= kLeakySlope;
}

// 2x2 average pooling; edge windows average only their valid cells.
Tensor pool_forward(const Tensor& in) {
  Tensor out((in.h + 1) / 2, (in.w + 1) / 2, in.c);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      double* o = out.px(y, x);
      int n = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int yy = 2 * y + dy, xx = 2 * x + dx;
          if (yy >= in.h || xx >= in.w) continue;
          const double* ip = in.px(yy, xx);
          for (int ch = 0; ch < in.c; ++ch) o[ch] += ip[ch];
          ++n;
        }
      }
      for (int ch = 0; ch < in.c; ++ch) o[ch] /= n;
    }
  }
  return out;
}

Tensor pool_backward(const Tensor& dout, int in_h, int in_w) {
  Tensor din(in_h, in_w, dout.c);
  for (int y = 0; y < dout.h; ++y) {
    for (int x = 0; x < dout.w; ++x) {
      const int n = (std::min(2, in_h - 2 * y)) * (std::min(2, in_w - 2 * x));
      const double* g = dout.px(y, x);
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const int yy = 2 * y + dy, xx = 2 * x + dx;
          if (yy >= in_h || xx >= in_w) continue;
          double* d = din.px(yy, xx);
          for (int ch = 0; ch < dout.c; ++ch) d[ch] += g[ch] / n;
        }
      }
    }
  }
  return din;
}

// Nearest-neighbour 2x upsampling cropped to (h, w).
Tensor up_forward(const Tensor& in, int h, int w) {
  Tensor out(h, w, in.c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) std::copy_n(in.px(y / 2, x / 2), in.c, out.px(y, x));
  return out;
}

Tensor up_backward(const Tensor& dout, int in_h, int in_w) {
  Tensor din(in_h, in_w, dout.c);
  for (int y = 0; y < dout.h; ++y) {
    for (int x = 0; x < dout.w; ++x) {
      const double* g = dout.px(y, x);
      double* d = din.px(y / 2, x / 2);
      for (int ch = 0; ch < dout.c; ++ch) d[ch] += g[ch];
    }
  }
  return din;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out(a.h, a.w, a.c + b.c);
  for (int y = 0; y < a.h; ++y) {
    for (int x = 0; x < a.w; ++x) {
      std::copy_n(a.px(y, x), a.c, out.px(y, x));
      std::copy_n(b.px(y, x), b.c, out.px(y, x) + a.c);
    }
  }
  return out;
}

void split(const Tensor& g, Tensor& ga, Tensor& gb, int ca) {
  ga = Tensor(g.h, g.w, ca);
  gb = Tensor(g.h, g.w, g.c - ca);
  for (int y = 0; y < g.h; ++y) {
    for (int x = 0; x < g.w; ++x) {
      std::copy_n(g.px(y, x), ca, ga.px(y, x));
      std::copy_n(g.px(y, x) + ca, g.c - ca, gb.px(y, x));
    }
  }
}

Tensor make_input(const BlobNetModel& model, const FeatureTensor& x) {
  if (x.depth != model.arch().temporal_depth)
    throw ShapeError("feature depth " + std::to_string(x.depth) + " does not match model temporal depth " +
                     std::to_string(model.arch().temporal_depth));
  if (x.rows < 1 || x.cols < 1) throw ShapeError("empty feature grid");
  if (x.values.size() != static_cast<std::size_t>(x.depth) * x.rows * x.cols * kFeatureChannels ||
      x.combos.size() != static_cast<std::size_t>(x.depth) * x.rows * x.cols)
    throw ShapeError("feature tensor storage does not match its shape");
  const auto params = model.parameters();
  Tensor in(x.rows, x.cols, x.depth * kFeatureChannels);
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < x.cols; ++c) {
      double* p = in.px(r, c);
      for (int t = 0; t < x.depth; ++t) {
        const std::size_t cell = x.cell(t, r, c);
        const auto combo = x.combos[cell];
        if (combo >= ComboTable::kSize) throw ShapeError("combo index out of range");
        p[t * kFeatureChannels + 0] = params[combo];
        p[t * kFeatureChannels + 1] = x.values[cell * kFeatureChannels + 1];
        p[t * kFeatureChannels + 2] = x.values[cell * kFeatureChannels + 2];
      }
    }
  }
  return in;
}

struct Activations {
  Tensor in, a1, p1, a2, p2, u1, c1, a3, u2, c2, a4, logit;
};

Activations run_forward(const BlobNetModel& m, const FeatureTensor& x) {
  Activations a;
  a.in = make_input(m, x);
  a.a1 = conv_forward(a.in, view(m, 0));
  leaky_inplace(a.a1);
  a.p1 = pool_forward(a.a1);
  a.a2 = conv_forward(a.p1, view(m, 1));
  leaky_inplace(a.a2);
  a.p2 = pool_forward(a.a2);
  a.u1 = up_forward(a.p2, a.a2.h, a.a2.w);
  a.c1 = concat(a.u1, a.a2);
  a.a3 = conv_forward(a.c1, view(m, 2));
  leaky_inplace(a.a3);
  a.u2 = up_forward(a.a3, a.a1.h, a.a1.w);
  a.c2 = concat(a.u2, a.a1);
  a.a4 = conv_forward(a.c2, view(m, 3));
  leaky_inplace(a.a4);
  a.logit = conv_forward(a.a4, view(m, 4));
  return a;
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw ParseError("truncated model checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

constexpr char kMagic[8] = {'C', 'O', 'V', 'A', 'B', 'N', 'L', '1'};

}  // namespace

BlobNetModel::BlobNetModel(BlobNetArch arch) : arch_(arch) {
  if (arch.temporal_depth < 1 || arch.enc1_channels < 1 || arch.enc2_channels < 1)
    throw ConfigError("invalid BlobNet architecture");
  std::size_t offset = ComboTable::kSize;
  auto add = [&](std::string name, int in, int out, int k) {
    Layer l{std::move(name), in, out, k, offset, 0};
    offset += static_cast<std::size_t>(in) * out * k * k;
    l.bias_offset = offset;
    offset += static_cast<std::size_t>(out);
    layers_.push_back(std::move(l));
  };
  const int c1 = arch.enc1_channels, c2 = arch.enc2_channels;
  add("enc1", arch.temporal_depth * kFeatureChannels, c1, 3);
  add("enc2", c1, c2, 3);
  add("dec1", c2 + c2, c2, 3);
  add("dec2", c2 + c1, c1, 3);
  add("head", c1, 1, 1);
  params_.assign(offset, 0.0);
}

BlobNetModel BlobNetModel::random(BlobNetArch arch, std::uint64_t seed) {
  BlobNetModel m(arch);
  std::mt19937_64 rng(seed);
  for (const auto& l : m.layers_) {
    const double fan_in = static_cast<double>(l.in_channels) * l.kernel * l.kernel;
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = l.weight_offset; i < l.bias_offset; ++i) m.params_[i] = dist(rng);
  }
  return m;
}

Embedding BlobNetModel::embedding() const {
  Embedding e{};
  std::copy_n(params_.begin(), ComboTable::kSize, e.begin());
  return e;
}

ProbabilityMap blobnet_logits(const BlobNetModel& model, const FeatureTensor& x) {
  const Activations a = run_forward(model, x);
  ProbabilityMap out(x.rows, x.cols);
  std::copy(a.logit.v.begin(), a.logit.v.end(), out.data.begin());
  return out;
}

ProbabilityMap blobnet_forward(const BlobNetModel& model, const FeatureTensor& x) {
  ProbabilityMap p = blobnet_logits(model, x);
  for (double& v : p.data) v = sigmoid(v);
  return p;
}

double blobnet_loss(const BlobNetModel& model, const FeatureTensor& x, const BinaryGrid& target,
                    std::span<double> grad, double grad_scale, double positive_weight) {
  if (target.rows != x.rows || target.cols != x.cols) throw ShapeError("target grid does not match feature grid");
  if (!grad.empty() && grad.size() != model.parameter_count()) throw ShapeError("gradient buffer size mismatch");
  const Activations a = run_forward(model, x);
  const double n = static_cast<double>(target.size());

  double loss = 0.0;
  Tensor dlogit(a.logit.h, a.logit.w, 1);
  for (std::size_t i = 0; i < target.data.size(); ++i) {
    const double z = a.logit.v[i];
    const double y = target.data[i] ? 1.0 : 0.0;
    loss += positive_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
    const double s = sigmoid(z);
    dlogit.v[i] = (positive_weight * y * (s - 1.0) + (1.0 - y) * s) / n;
  }
  loss /= n;
  if (grad.empty()) return loss;

  for (double& g : dlogit.v) g *= grad_scale;
  double* g = grad.data();
  auto dw = [&](std::size_t i) { return g + model.layers()[i].weight_offset; };
  auto db = [&](std::size_t i) { return g + model.layers()[i].bias_offset; };

  Tensor d_a4 = conv_backward(a.a4, dlogit, view(model, 4), dw(4), db(4));
  leaky_backward(a.a4, d_a4);
  Tensor d_c2 = conv_backward(a.c2, d_a4, view(model, 3), dw(3), db(3));
  Tensor d_u2, d_a1;
  split(d_c2, d_u2, d_a1, a.u2.c);
  Tensor d_a3 = up_backward(d_u2, a.a3.h, a.a3.w);
  leaky_backward(a.a3, d_a3);
  Tensor d_c1 = conv_backward(a.c1, d_a3, view(model, 2), dw(2), db(2));
  Tensor d_u1, d_a2;
  split(d_c1, d_u1, d_a2, a.u1.c);
  Tensor d_p2 = up_backward(d_u1, a.p2.h, a.p2.w);
  Tensor d_a2_pool = pool_backward(d_p2, a.a2.h, a.a2.w);
  for (std::size_t i = 0; i < d_a2.v.size(); ++i) d_a2.v[i] += d_a2_pool.v[i];
  leaky_backward(a.a2, d_a2);
  Tensor d_p1 = conv_backward(a.p1, d_a2, view(model, 1), dw(1), db(1));
  Tensor d_a1_pool = pool_backward(d_p1, a.a1.h, a.a1.w);
  for (std::size_t i = 0; i < d_a1.v.size(); ++i) d_a1.v[i] += d_a1_pool.v[i];
  leaky_backward(a.a1, d_a1);
  Tensor d_in = conv_backward(a.in, d_a1, view(model, 0), dw(0), db(0));

  // Embedding: channel 0 of every stacked frame came from params[combo].
  for (int r = 0; r < x.rows; ++r)
    for (int c = 0; c < x.cols; ++c)
      for (int t = 0; t < x.depth; ++t) g[x.combos[x.cell(t, r, c)]] += d_in.px(r, c)[t * kFeatureChannels];
  return loss;
}

BinaryGrid threshold_mask(const ProbabilityMap& probs, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("threshold must lie in (0,1)");
  BinaryGrid out(probs.rows, probs.cols);
  for (std::size_t i = 0; i < probs.data.size(); ++i) out.data[i] = probs.data[i] > theta ? 1 : 0;
  return out;
}

void save_model(const BlobNetModel& model, const std::filesystem::path& path) {
  nlohmann::json h;
  h["format"] = "cova-blobnet";
  h["version"] = 1;
  h["dtype"] = "f64le";
  h["temporal_depth"] = model.arch().temporal_depth;
  h["enc1_channels"] = model.arch().enc1_channels;
  h["enc2_channels"] = model.arch().enc2_channels;
  h["embedding_size"] = ComboTable::kSize;
  h["parameter_count"] = model.parameter_count();
  auto layers = nlohmann::json::array();
  for (const auto& l : model.layers())
    layers.push_back({{"name", l.name}, {"in", l.in_channels}, {"out", l.out_channels}, {"kernel", l.kernel}});
  h["layers"] = std::move(layers);
  const std::string header = h.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double p : model.parameters()) put_u64(out, std::bit_cast<std::uint64_t>(p));
  if (!out) throw DataError("failed writing " + path.string());
}

BlobNetModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0) throw ParseError("not a BlobNet checkpoint");
  const std::uint64_t len = get_u64(in);
  if (len > (1u << 20)) throw ParseError("checkpoint header too large");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(in.gcount()) != len) throw ParseError("truncated model checkpoint");
  BlobNetArch arch;
  std::size_t count = 0;
  try {
    const auto h = nlohmann::json::parse(header);
    if (h.at("format").get<std::string>() != "cova-blobnet" || h.at("version").get<int>() != 1 ||
        h.at("dtype").get<std::string>() != "f64le")
      throw ParseError("unsupported checkpoint format");
    arch.temporal_depth = h.at("temporal_depth").get<int>();
    arch.enc1_channels = h.at("enc1_channels").get<int>();
    arch.enc2_channels = h.at("enc2_channels").get<int>();
    count = h.at("parameter_count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint header: ") + e.what());
  }
  BlobNetModel model(arch);
  if (count != model.parameter_count()) throw ParseError("checkpoint parameter count does not match architecture");
  for (double& p : model.parameters()) p = std::bit_cast<double>(get_u64(in));
  return model;
}

}  // namespace cova
