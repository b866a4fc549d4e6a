#include "iris/dataset.hpp"

#include "iris/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace iris {

namespace {

constexpr char kMagic[4] = {'I', 'R', 'D', '1'};
constexpr std::uint32_t kVersion = 1;

bool same_bits(const float* a, const float* b, Eigen::Index n) {
  return std::equal(a, a + n, b, [](float x, float y) {
    return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
  });
}

}  // namespace

bool operator==(const Trajectory& a, const Trajectory& b) {
  if (a.states.rows() != b.states.rows() || a.states.cols() != b.states.cols()) return false;
  if (a.actions.rows() != b.actions.rows() || a.actions.cols() != b.actions.cols()) return false;
  if (a.rewards.size() != b.rewards.size()) return false;
  return same_bits(a.states.data(), b.states.data(), a.states.size()) &&
         same_bits(a.actions.data(), b.actions.data(), a.actions.size()) &&
         same_bits(a.rewards.data(), b.rewards.data(), a.rewards.size());
}

void validate_trajectory(const Trajectory& traj) {
  const Eigen::Index L = traj.actions.cols();
  if (L < 1) throw std::invalid_argument("trajectory must contain at least one transition");
  if (traj.states.cols() != L + 1 || traj.rewards.size() != L)
    throw std::invalid_argument("trajectory length mismatch: need |states| = |actions| + 1 = |rewards| + 1");
  if (!traj.states.allFinite() || !traj.actions.allFinite() || !traj.rewards.allFinite())
    throw std::invalid_argument("trajectory contains non-finite values");
  for (Eigen::Index k = 0; k + 1 < L; ++k)
    if (traj.rewards[k] != 0.0f)
      throw std::invalid_argument("trajectory is not goal-reaching: nonzero reward before the final step");
  if (traj.rewards[L - 1] != 1.0f)
    throw std::invalid_argument("trajectory is not goal-reaching: final reward must be 1");
}

TrajectoryDataset::TrajectoryDataset(int obs_dim, int act_dim, std::string env_id)
    : obs_dim_(obs_dim), act_dim_(act_dim), env_id_(std::move(env_id)) {
  if (obs_dim <= 0 || act_dim <= 0) throw std::invalid_argument("dataset dimensions must be positive");
}

void TrajectoryDataset::append(Trajectory traj) {
  if (traj.obs_dim() != obs_dim_ || traj.act_dim() != act_dim_)
    throw std::invalid_argument("trajectory dimensions do not match dataset (obs " +
                                std::to_string(traj.obs_dim()) + ", act " + std::to_string(traj.act_dim()) +
                                ")");
  validate_trajectory(traj);
  trajectories_.push_back(std::move(traj));
  norm_.reset();
}

const NormStats& TrajectoryDataset::recompute_norm_stats() {
  norm_ = compute_norm_stats(*this);
  return *norm_;
}

const NormStats& TrajectoryDataset::norm_stats() const {
  if (!norm_) throw std::logic_error("normalization statistics are stale; call recompute_norm_stats()");
  return *norm_;
}

double TrajectoryDataset::mean_length() const {
  if (trajectories_.empty()) return 0.0;
  double total = 0.0;
  for (const auto& t : trajectories_) total += static_cast<double>(t.length());
  return total / static_cast<double>(trajectories_.size());
}

bool operator==(const TrajectoryDataset& a, const TrajectoryDataset& b) {
  return a.obs_dim_ == b.obs_dim_ && a.act_dim_ == b.act_dim_ && a.env_id_ == b.env_id_ &&
         a.trajectories_ == b.trajectories_;
}

NormStats compute_norm_stats(const TrajectoryDataset& dataset) {
  if (dataset.empty()) throw std::invalid_argument("cannot compute normalization statistics of an empty dataset");
  // Welford accumulation in double over every stored vector.
  auto accumulate = [](auto columns_of, int dim, const TrajectoryDataset& ds, Vec& mean, Vec& stdev) {
    mean = Vec::Zero(dim);
    Vec m2 = Vec::Zero(dim);
    double n = 0.0;
    for (const auto& traj : ds.trajectories()) {
      const MatF& m = columns_of(traj);
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        n += 1.0;
        for (int d = 0; d < dim; ++d) {
          const double x = m(d, c);
          const double delta = x - mean[d];
          mean[d] += delta / n;
          m2[d] += delta * (x - mean[d]);
        }
      }
    }
    stdev = (m2 / n).cwiseSqrt().cwiseMax(kStdFloor);
  };
  NormStats s;
  accumulate([](const Trajectory& t) -> const MatF& { return t.states; }, dataset.obs_dim(), dataset, s.state_mean,
             s.state_std);
  accumulate([](const Trajectory& t) -> const MatF& { return t.actions; }, dataset.act_dim(), dataset,
             s.action_mean, s.action_std);
  return s;
}

WindowSampler::WindowSampler(const TrajectoryDataset& dataset, int T) : dataset_(&dataset), T_(T) {
  if (T < 1) throw std::invalid_argument("window length must be positive");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Eigen::Index L = dataset[i].length();
    if (L < T) continue;
    total_ += static_cast<std::uint64_t>(L - T + 1);
    traj_ids_.push_back(i);
    cumulative_.push_back(total_);
  }
  if (total_ == 0)
    throw std::invalid_argument("no trajectory is long enough for window length " + std::to_string(T));
}

SequenceWindow WindowSampler::at(std::uint64_t global_index) const {
  if (global_index >= total_) throw std::out_of_range("window index out of range");
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), global_index);
  const auto slot = static_cast<std::size_t>(it - cumulative_.begin());
  const std::uint64_t first = slot == 0 ? 0 : cumulative_[slot - 1];
  const Trajectory& traj = (*dataset_)[traj_ids_[slot]];

  SequenceWindow w;
  w.traj_index = traj_ids_[slot];
  w.start = static_cast<Eigen::Index>(global_index - first);
  w.states = traj.states.middleCols(w.start, T_ + 1);
  w.actions = traj.actions.middleCols(w.start, T_);
  w.rewards = traj.rewards.segment(w.start, T_);
  w.is_terminal = (w.start + T_ == traj.length());
  return w;
}

SequenceWindow WindowSampler::sample(Rng& rng) const {
  std::uniform_int_distribution<std::uint64_t> pick(0, total_ - 1);
  return at(pick(rng));
}

SequenceWindow sample_window(const TrajectoryDataset& dataset, int T, Rng& rng) {
  return WindowSampler(dataset, T).sample(rng);
}

TrajectoryDataset filter_best_fraction(const TrajectoryDataset& dataset, double frac) {
  if (!(frac > 0.0 && frac <= 1.0)) throw std::invalid_argument("fraction must lie in (0, 1]");
  if (dataset.empty()) throw std::invalid_argument("cannot filter an empty dataset");
  const std::size_t n = dataset.size();
  // The tolerance keeps products such as 0.7 * 10 from rounding up.
  auto keep = static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dataset[a].length() < dataset[b].length(); });
  order.resize(keep);
  std::sort(order.begin(), order.end());

  TrajectoryDataset out(dataset.obs_dim(), dataset.act_dim(), dataset.env_id());
  for (std::size_t i : order) out.append(dataset[i]);
  out.recompute_norm_stats();
  return out;
}

std::string encode_dataset(const TrajectoryDataset& dataset) {
  io::ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(dataset.obs_dim()));
  w.u32(static_cast<std::uint32_t>(dataset.act_dim()));
  w.u32(static_cast<std::uint32_t>(dataset.env_id().size()));
  w.bytes(dataset.env_id());
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  for (const auto& traj : dataset.trajectories()) {
    w.u32(static_cast<std::uint32_t>(traj.length()));
    for (Eigen::Index i = 0; i < traj.states.size(); ++i) w.f32(traj.states.data()[i]);
    for (Eigen::Index i = 0; i < traj.actions.size(); ++i) w.f32(traj.actions.data()[i]);
    for (Eigen::Index i = 0; i < traj.rewards.size(); ++i) w.f32(traj.rewards[i]);
  }
  return w.str();
}

TrajectoryDataset decode_dataset(const std::string& bytes) {
  io::ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != std::string_view(kMagic, 4)) throw FormatError("bad dataset magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  const auto obs_dim = static_cast<int>(r.u32());
  const auto act_dim = static_cast<int>(r.u32());
  if (obs_dim <= 0 || act_dim <= 0) throw FormatError("invalid dataset dimensions");
  const std::uint32_t id_len = r.u32();
  std::string env_id = r.bytes(id_len);
  const std::uint32_t n_traj = r.u32();

  TrajectoryDataset ds(obs_dim, act_dim, std::move(env_id));
  for (std::uint32_t k = 0; k < n_traj; ++k) {
    const std::uint32_t L = r.u32();
    const std::size_t floats = (static_cast<std::size_t>(L) + 1) * obs_dim + static_cast<std::size_t>(L) * act_dim + L;
    if (r.remaining() < floats * 4) throw FormatError("truncated payload in trajectory " + std::to_string(k));
    Trajectory t;
    t.states.resize(obs_dim, L + 1);
    t.actions.resize(act_dim, L);
    t.rewards.resize(L);
    for (Eigen::Index i = 0; i < t.states.size(); ++i) t.states.data()[i] = r.f32();
    for (Eigen::Index i = 0; i < t.actions.size(); ++i) t.actions.data()[i] = r.f32();
    for (Eigen::Index i = 0; i < t.rewards.size(); ++i) t.rewards[i] = r.f32();
    try {
      ds.append(std::move(t));
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("invalid trajectory in file: ") + e.what());
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after dataset payload");
  if (!ds.empty()) ds.recompute_norm_stats();
  return ds;
}

void save_dataset(const TrajectoryDataset& dataset, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(dataset));
}

TrajectoryDataset load_dataset(const std::filesystem::path& path) { return decode_dataset(io::read_file(path)); }

}  // namespace iris
