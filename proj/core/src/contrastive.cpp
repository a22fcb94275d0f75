#include "cmdsim/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cmdsim/error.hpp"
#include "cmdsim/evaluation.hpp"
#include "cmdsim/io.hpp"
#include "cmdsim/rng.hpp"

namespace cmdsim {
namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const Mat>;
using MatMap = Eigen::Map<Mat>;

Mat stack(std::span<const std::vector<double>> rows, std::size_t dim) {
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) {
      throw InvalidArgument("input vector " + std::to_string(i) + " has dimension " + std::to_string(rows[i].size()) +
                            ", adapter expects " + std::to_string(dim));
    }
    m.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), static_cast<Eigen::Index>(dim));
  }
  return m;
}

// Rows of `m` scaled to unit length; the norms are returned alongside.
Mat normalize_rows(const Mat& m, Eigen::VectorXd& norms) {
  norms = m.rowwise().norm();
  Mat out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (norms(i) == 0.0) throw IntegrityError("adapter maps an input to the zero vector");
    out.row(i) /= norms(i);
  }
  return out;
}

struct Forward {
  Mat anchors_unit;
  Mat positives_unit;
  Eigen::VectorXd anchor_norms;
  Eigen::VectorXd positive_norms;
  SimilarityMatrix sims;
};

Forward forward(const Mat& anchors, const Mat& positives, const AdapterModel& adapter) {
  ConstMatMap w(adapter.weights.data(), static_cast<Eigen::Index>(adapter.d_in), static_cast<Eigen::Index>(adapter.d_out));
  Forward f;
  f.anchors_unit = normalize_rows(anchors * w, f.anchor_norms);
  f.positives_unit = normalize_rows(positives * w, f.positive_norms);
  Mat s = f.anchors_unit * f.positives_unit.transpose();
  f.sims.k = static_cast<std::size_t>(s.rows());
  f.sims.sims.assign(s.data(), s.data() + s.size());
  return f;
}

void check_batch(std::span<const std::vector<double>> anchors, std::span<const std::vector<double>> positives) {
  if (anchors.size() != positives.size()) throw InvalidArgument("anchors and positives differ in count");
  if (anchors.empty()) throw InvalidArgument("empty batch");
}

class Adam {
 public:
  Adam(std::size_t size, const TrainConfig& cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    const double b1 = cfg_.adam_beta1;
    const double b2 = cfg_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
      params[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.adam_epsilon);
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

}  // namespace

void TrainConfig::validate() const {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be > 0");
  if (batch_pairs < 2) throw InvalidArgument("batch must hold at least 2 pairs");
  if (!(learning_rate >= 0.0)) throw InvalidArgument("learning rate must be >= 0");
  if (eval_every_steps == 0) throw InvalidArgument("eval_every_steps must be positive");
  if (val_pairs == 0) throw InvalidArgument("validation split must be non-empty");
}

double info_nce_loss(const SimilarityMatrix& sims, double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be > 0");
  if (sims.sims.size() != sims.k * sims.k) throw InvalidArgument("similarity matrix must be square");
  double loss = 0.0;
  for (std::size_t i = 0; i < sims.k; ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sims.k; ++j) row_max = std::max(row_max, sims.at(i, j) / temperature);
    double sum = 0.0;
    for (std::size_t j = 0; j < sims.k; ++j) sum += std::exp(sims.at(i, j) / temperature - row_max);
    loss += row_max + std::log(sum) - sims.at(i, i) / temperature;
  }
  return std::max(loss, 0.0);
}

AdapterModel AdapterModel::identity(std::size_t d_in, std::size_t d_out, std::string backend_identity) {
  if (d_out == 0) d_out = d_in;
  if (d_in == 0) throw InvalidArgument("adapter dimension must be positive");
  AdapterModel m;
  m.d_in = d_in;
  m.d_out = d_out;
  m.weights.assign(d_in * d_out, 0.0);
  for (std::size_t i = 0; i < std::min(d_in, d_out); ++i) m.weights[i * d_out + i] = 1.0;
  m.backend_identity = std::move(backend_identity);
  return m;
}

std::vector<double> AdapterModel::project(std::span<const double> x) const {
  if (x.size() != d_in) {
    throw InvalidArgument("adapter expects dimension " + std::to_string(d_in) + ", got " + std::to_string(x.size()));
  }
  std::vector<double> y(d_out, 0.0);
  for (std::size_t r = 0; r < d_in; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = weights.data() + r * d_out;
    for (std::size_t c = 0; c < d_out; ++c) y[c] += xr * row[c];
  }
  return y;
}

EmbeddingVector AdapterModel::apply(const EmbeddingVector& x) const {
  return normalized(EmbeddingVector(project(x.values())));
}

void AdapterModel::validate() const {
  if (d_in == 0 || d_out == 0) throw IntegrityError("adapter has a zero dimension");
  if (weights.size() != d_in * d_out) throw IntegrityError("adapter weight count does not match its shape");
  for (double w : weights) {
    if (!std::isfinite(w)) throw IntegrityError("adapter has a non-finite weight");
  }
}

void AdapterModel::save(const std::filesystem::path& path) const {
  nlohmann::json j = {{"d_in", d_in}, {"d_out", d_out}, {"W", weights},
                      {"backend_identity", backend_identity}, {"step", step}};
  io::write_file(path, j.dump() + "\n");
}

AdapterModel AdapterModel::load(const std::filesystem::path& path) {
  AdapterModel m;
  try {
    auto j = nlohmann::json::parse(io::read_file(path));
    m.d_in = j.at("d_in").get<std::size_t>();
    m.d_out = j.at("d_out").get<std::size_t>();
    m.weights = j.at("W").get<std::vector<double>>();
    m.backend_identity = j.value("backend_identity", std::string());
    m.step = j.value("step", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

SimilarityMatrix similarity_matrix(const AdapterModel& adapter, std::span<const std::vector<double>> anchors,
                                   std::span<const std::vector<double>> positives) {
  check_batch(anchors, positives);
  return forward(stack(anchors, adapter.d_in), stack(positives, adapter.d_in), adapter).sims;
}

LossAndGradient info_nce_gradients(std::span<const std::vector<double>> anchors,
                                   std::span<const std::vector<double>> positives, const AdapterModel& adapter,
                                   double temperature) {
  check_batch(anchors, positives);
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be > 0");
  adapter.validate();
  const Mat a = stack(anchors, adapter.d_in);
  const Mat p = stack(positives, adapter.d_in);
  auto f = forward(a, p, adapter);
  const auto k = static_cast<Eigen::Index>(f.sims.k);

  LossAndGradient out;
  out.loss = info_nce_loss(f.sims, temperature);

  // dL/dS = (softmax(S / tau) - I) / tau, row-wise.
  Mat g(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < k; ++j) row_max = std::max(row_max, f.sims.at(i, j) / temperature);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      g(i, j) = std::exp(f.sims.at(i, j) / temperature - row_max);
      sum += g(i, j);
    }
    for (Eigen::Index j = 0; j < k; ++j) g(i, j) = (g(i, j) / sum - (i == j ? 1.0 : 0.0)) / temperature;
  }

  // Back through the row normalization: d(x/|x|) = (I - x̂x̂ᵀ)/|x|.
  auto through_norm = [](const Mat& unit, const Eigen::VectorXd& norms, const Mat& d_unit) {
    Mat d = d_unit;
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
      const double radial = d_unit.row(i).dot(unit.row(i));
      d.row(i) = (d_unit.row(i) - radial * unit.row(i)) / norms(i);
    }
    return d;
  };
  const Mat d_anchor = through_norm(f.anchors_unit, f.anchor_norms, g * f.positives_unit);
  const Mat d_positive = through_norm(f.positives_unit, f.positive_norms, g.transpose() * f.anchors_unit);

  Mat grad = a.transpose() * d_anchor + p.transpose() * d_positive;
  out.gradient.assign(grad.data(), grad.data() + grad.size());
  return out;
}

double in_split_mrr3(const AdapterModel& adapter, std::span<const std::vector<double>> anchors,
                     std::span<const std::vector<double>> positives) {
  auto sims = similarity_matrix(adapter, anchors, positives);
  std::vector<std::size_t> ranks;
  ranks.reserve(sims.k);
  std::vector<double> negatives;
  for (std::size_t i = 0; i < sims.k; ++i) {
    negatives.clear();
    for (std::size_t j = 0; j < sims.k; ++j) {
      if (j != i) negatives.push_back(sims.at(i, j));
    }
    ranks.push_back(rank_of_positive(sims.at(i, i), negatives));
  }
  return mrr_at_k(ranks, 3);
}

TrainResult train_on_vectors(std::span<const std::vector<double>> anchors, std::span<const std::vector<double>> positives,
                             const TrainConfig& cfg, std::string backend_identity) {
  cfg.validate();
  if (anchors.size() != positives.size()) throw InvalidArgument("anchors and positives differ in count");
  if (anchors.size() < cfg.batch_pairs + cfg.val_pairs) {
    throw InvalidArgument("insufficient pairs: have " + std::to_string(anchors.size()) + ", need at least " +
                          std::to_string(cfg.batch_pairs + cfg.val_pairs) + " (batch + validation)");
  }
  const std::size_t d_in = anchors.front().size();

  Rng rng(cfg.rng_seed);
  std::vector<std::size_t> order(anchors.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);

  std::vector<std::vector<double>> val_a, val_p;
  for (std::size_t i = 0; i < cfg.val_pairs; ++i) {
    val_a.push_back(anchors[order[i]]);
    val_p.push_back(positives[order[i]]);
  }
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(cfg.val_pairs), order.end());

  AdapterModel model = AdapterModel::identity(d_in, cfg.out_dim, backend_identity);
  Adam adam(model.weights.size(), cfg);

  TrainResult result;
  double best_mrr = -1.0;
  double window_loss = 0.0;
  std::size_t window_batches = 0;
  std::size_t step = 0;

  auto batch_vectors = [&](std::size_t start, std::vector<std::vector<double>>& ba, std::vector<std::vector<double>>& bp) {
    ba.clear();
    bp.clear();
    for (std::size_t i = start; i < start + cfg.batch_pairs; ++i) {
      ba.push_back(anchors[train_idx[i]]);
      bp.push_back(positives[train_idx[i]]);
    }
  };
  auto evaluate = [&](double train_loss) {
    double mrr = in_split_mrr3(model, val_a, val_p);
    result.history.push_back({step, train_loss, mrr});
    if (mrr > best_mrr) {
      best_mrr = mrr;
      result.best = model;
      result.best.step = step;
      result.best_step = step;
    }
  };

  std::vector<std::vector<double>> ba, bp;
  const std::size_t batches_per_epoch = train_idx.size() / cfg.batch_pairs;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(train_idx, rng);
    if (epoch == 0) {
      batch_vectors(0, ba, bp);
      evaluate(info_nce_gradients(ba, bp, model, cfg.temperature).loss);
    }
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      batch_vectors(b * cfg.batch_pairs, ba, bp);
      auto lg = info_nce_gradients(ba, bp, model, cfg.temperature);
      adam.step(model.weights, lg.gradient);
      ++step;
      window_loss += lg.loss;
      ++window_batches;
      if (step % cfg.eval_every_steps == 0) {
        evaluate(window_loss / static_cast<double>(window_batches));
        window_loss = 0.0;
        window_batches = 0;
      }
    }
  }
  if (result.history.empty()) {
    evaluate(std::numeric_limits<double>::quiet_NaN());
  } else if (window_batches > 0) {
    evaluate(window_loss / static_cast<double>(window_batches));
  }
  return result;
}

namespace {

std::vector<std::vector<double>> as_rows(const std::vector<EmbeddingVector>& vs) {
  std::vector<std::vector<double>> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.emplace_back(v.values().begin(), v.values().end());
  return out;
}

}  // namespace

TrainResult train(std::span<const CommandLinePair> pairs, EmbeddingBackend& backend, const TrainConfig& cfg,
                  EmbeddingCache* cache) {
  std::vector<std::string> a, p;
  a.reserve(pairs.size());
  p.reserve(pairs.size());
  for (const auto& pair : pairs) {
    a.push_back(pair.anchor.text);
    p.push_back(pair.positive.text);
  }
  auto ea = as_rows(embed_batch(backend, a, cache));
  auto ep = as_rows(embed_batch(backend, p, cache));
  return train_on_vectors(ea, ep, cfg, backend.identity());
}

Encoder make_adapted_encoder(EmbeddingBackend& backend, const AdapterModel& adapter, EmbeddingCache* cache) {
  if (adapter.d_in != backend.dim()) {
    throw InvalidArgument("adapter input dimension " + std::to_string(adapter.d_in) + " does not match backend " +
                          backend.identity() + " (" + std::to_string(backend.dim()) + ")");
  }
  return [&backend, adapter, cache](std::span<const std::string> texts) {
    auto base = embed_batch(backend, texts, cache);
    std::vector<EmbeddingVector> out;
    out.reserve(base.size());
    for (const auto& v : base) out.push_back(adapter.apply(v));
    return out;
  };
}

}  // namespace cmdsim
