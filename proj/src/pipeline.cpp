#include "qnode/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <thread>
#include <unordered_map>

#include "qnode/analyzer.hpp"
#include "qnode/coincidence.hpp"
#include "qnode/memory.hpp"
#include "qnode/source.hpp"

namespace qnode {
namespace {

// Chunks are fixed-width slices of simulated time, each driven by streams
// derived from (seed, stage, chunk index). Results are therefore identical
// however chunks are distributed over threads.
constexpr double kChunkDuration = 0.25;

struct ChunkOutput {
  std::vector<TimeTag> idler;
  std::vector<TimeTag> signal_a;
  std::vector<TimeTag> signal_b;
};

DensityMatrix pure_pair_state(double phase) {
  CVector psi = CVector::Zero(4);
  psi(0) = 1.0 / std::numbers::sqrt2;
  psi(3) = std::polar(1.0 / std::numbers::sqrt2, phase);
  return DensityMatrix(psi * psi.adjoint());
}

// Joint-outcome tables shared by every chunk. A pure pair with relative
// phase d has p(a, b) = base(a, b) + Re(e^{i d} cross(a, b)), which avoids
// rebuilding 4x4 operators for every dephased pair.
struct CollapseTables {
  Eigen::Matrix4d coherent;
  Eigen::Matrix4d depolarized;
  Eigen::Matrix4d base;
  Eigen::Matrix4cd cross;
};

Eigen::Matrix4d dephased_table(const CollapseTables& t, double phase) {
  Eigen::Matrix4d out;
  const Complex rot = std::polar(1.0, phase);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double p = t.base(a, b) + (rot * t.cross(a, b)).real();
      out(a, b) = p < 0 ? 0.0 : p;
    }
  return out;
}

CollapseTables make_tables(const PovmSet& povm_i, const PovmSet& povm_s) {
  CollapseTables t;
  auto effect = [](const PovmSet& povm, int k) -> const CMatrix& {
    return k < 3 ? povm.elements()[static_cast<size_t>(k)].effect
                 : povm.no_click();
  };
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const CMatrix& ea = effect(povm_i, a);
      const CMatrix& eb = effect(povm_s, b);
      t.base(a, b) = 0.5 * (ea(0, 0).real() * eb(0, 0).real() +
                            ea(1, 1).real() * eb(1, 1).real());
      t.cross(a, b) = ea(0, 1) * eb(0, 1);
    }
  }
  t.coherent = joint_franson_probability(pure_pair_state(0.0), povm_i, povm_s);
  t.depolarized = joint_franson_probability(
      DensityMatrix(CMatrix::Identity(4, 4) * 0.25), povm_i, povm_s);
  if ((dephased_table(t, 0.0) - t.coherent).cwiseAbs().maxCoeff() > 1e-12)
    throw std::logic_error("pair collapse tables are inconsistent");
  return t;
}

SlotLabel slot_from_index(size_t k) {
  switch (k) {
    case 0:
      return SlotLabel::early;
    case 1:
      return SlotLabel::central;
    case 2:
      return SlotLabel::late;
    default:
      return SlotLabel::none;
  }
}

std::vector<TimeTag> background_tags(const std::vector<double>& times,
                                     std::uint16_t chan) {
  std::vector<TimeTag> out;
  out.reserve(times.size());
  for (double t : times) {
    TimeTag tag;
    tag.time = t;
    tag.channel = chan;
    tag.kind = TagKind::background;
    out.push_back(tag);
  }
  return out;
}

ChunkOutput simulate_chunk(const Scenario& sc, std::uint64_t seed,
                           std::uint64_t chunk, double t0, double dur,
                           const CollapseTables* tables) {
  const Rng base(seed);
  Rng src_rng = base.derive(rng_stage::source, chunk);
  Rng noise_rng = base.derive(rng_stage::noise, chunk);
  Rng mem_rng = base.derive(rng_stage::memory, chunk);
  Rng col_rng = base.derive(rng_stage::collapse, chunk);
  Rng ai_rng = base.derive(rng_stage::analyzer_idler, chunk);
  Rng as_rng = base.derive(rng_stage::analyzer_signal, chunk);
  Rng split_rng = base.derive(rng_stage::splitter, chunk);

  const SourceParams& sp = sc.source;
  std::vector<PairEvent> pairs =
      sample_pairs(dur, sp, src_rng, static_cast<std::int64_t>(chunk) << 32);
  for (auto& ev : pairs) {
    ev.idler_time += t0;
    ev.signal_time = std::max(0.0, ev.signal_time + t0);
  }

  // Backgrounds: stationary streams first, then the pair-correlated partners
  // (filter leakage arriving within ~prompt_spread of each pair).
  std::vector<double> idler_bg =
      sample_background(t0, dur, sp.idler_noise_rate, noise_rng);
  std::vector<double> signal_bg = sample_background(
      t0, dur, sp.signal_noise_rate * (1.0 - sp.herald_correlated_fraction),
      noise_rng);
  if (double mean = correlated_partner_mean(sp); mean > 0) {
    for (const auto& ev : pairs) {
      std::uint64_t n = noise_rng.poisson(mean);
      for (std::uint64_t k = 0; k < n; ++k) {
        double u = noise_rng.uniform();
        double mag = noise_rng.exponential(1.0 / sp.prompt_spread);
        signal_bg.push_back(
            std::max(0.0, ev.signal_time + (u < 0.5 ? -mag : mag)));
      }
    }
    std::sort(signal_bg.begin(), signal_bg.end());
  }

  // Signal arm entering the storage device: pair photons plus broadband
  // background, in arrival order.
  std::vector<TimeTag> signal_in;
  signal_in.reserve(pairs.size() + signal_bg.size());
  for (const auto& ev : pairs) {
    TimeTag tag;
    tag.time = ev.signal_time;
    tag.pair_id = ev.id;
    tag.channel = channel::signal_a;
    tag.kind = TagKind::pair;
    signal_in.push_back(tag);
  }
  std::vector<TimeTag> sig_bg_tags = background_tags(signal_bg, channel::signal_a);
  sort_by_time(signal_in);
  signal_in = merge_sorted(signal_in, sig_bg_tags);
  std::vector<TimeTag> signal_mem =
      apply_memory_events(signal_in, sc.memory, mem_rng);

  ChunkOutput out;
  if (sc.analysis.mode == AnalysisMode::franson) {
    // Arrival time of each surviving pair photon behind the device.
    std::unordered_map<std::int64_t, double> echo_time;
    std::vector<TimeTag> signal_bg_mem;
    echo_time.reserve(signal_mem.size());
    for (const auto& tag : signal_mem) {
      if (tag.kind == TagKind::pair)
        echo_time.emplace(tag.pair_id, tag.time);
      else
        signal_bg_mem.push_back(tag);
    }

    const double delay_i = sc.analyzer_idler.delay;
    const double delay_s = sc.analyzer_signal.delay;
    out.idler.reserve(pairs.size());
    out.signal_a.reserve(pairs.size() / 4 + 16);
    Eigen::Matrix4d scratch;
    for (const auto& ev : pairs) {
      const Eigen::Matrix4d* table;
      if (ev.depolarized) {
        table = &tables->depolarized;
      } else if (ev.coherent) {
        table = &tables->coherent;
      } else {
        scratch = dephased_table(*tables, ev.pair_phase);
        table = &scratch;
      }
      SlotLabel slot_i = SlotLabel::none;
      SlotLabel slot_s = SlotLabel::none;
      double signal_base = 0.0;
      auto it = echo_time.find(ev.id);
      if (it != echo_time.end()) {
        std::tie(slot_i, slot_s) = sample_joint_slots(*table, col_rng);
        signal_base = it->second;
      } else {
        // Partner absorbed or lost: the idler sees the reduced state, i.e.
        // the joint table marginalized over the signal outcome.
        double marg[4];
        for (int r = 0; r < 4; ++r) marg[r] = table->row(r).sum();
        slot_i = slot_from_index(col_rng.pick(std::span<const double>(marg, 4)));
      }
      if (slot_i != SlotLabel::none) {
        TimeTag tag;
        tag.time = ev.idler_time + slot_time_shift(slot_i, delay_i);
        tag.pair_id = ev.id;
        tag.channel = channel::idler;
        tag.slot = slot_i;
        tag.kind = TagKind::pair;
        out.idler.push_back(tag);
      }
      if (slot_s != SlotLabel::none) {
        TimeTag tag;
        tag.time = signal_base + slot_time_shift(slot_s, delay_s);
        tag.pair_id = ev.id;
        tag.channel = channel::signal_a;
        tag.slot = slot_s;
        tag.kind = TagKind::pair;
        out.signal_a.push_back(tag);
      }
    }
    sort_by_time(out.idler);
    sort_by_time(out.signal_a);

    // Broadband photons traverse the analyzers as single photons in the
    // early temporal mode; their slot labels carry no pair information and
    // are cleared so exports distinguish interference from background.
    std::vector<TimeTag> idler_bg_tags =
        background_tags(idler_bg, channel::idler);
    std::vector<QubitMeta> metas_i(idler_bg_tags.size());
    std::vector<TimeTag> idler_bg_out = apply_analyzer_events(
        idler_bg_tags, metas_i, sc.analyzer_idler.to_mz(), ai_rng);
    for (auto& tag : idler_bg_out) tag.slot = SlotLabel::none;
    std::vector<QubitMeta> metas_s(signal_bg_mem.size());
    std::vector<TimeTag> signal_bg_out = apply_analyzer_events(
        signal_bg_mem, metas_s, sc.analyzer_signal.to_mz(), as_rng);
    for (auto& tag : signal_bg_out) tag.slot = SlotLabel::none;

    out.idler = merge_sorted(out.idler, idler_bg_out);
    out.signal_a = merge_sorted(out.signal_a, signal_bg_out);
    return out;
  }

  // bare / heralded-g2: no analyzers.
  out.idler.reserve(pairs.size() + idler_bg.size());
  for (const auto& ev : pairs) {
    TimeTag tag;
    tag.time = ev.idler_time;
    tag.pair_id = ev.id;
    tag.channel = channel::idler;
    tag.kind = TagKind::pair;
    out.idler.push_back(tag);
  }
  sort_by_time(out.idler);
  out.idler = merge_sorted(out.idler, background_tags(idler_bg, channel::idler));

  if (sc.analysis.mode == AnalysisMode::bare) {
    out.signal_a = std::move(signal_mem);
    return out;
  }
  // 50/50 splitter onto two detectors.
  out.signal_a.reserve(signal_mem.size() / 2 + 16);
  out.signal_b.reserve(signal_mem.size() / 2 + 16);
  for (const auto& tag : signal_mem) {
    TimeTag copy = tag;
    if (split_rng.bernoulli(0.5)) {
      copy.channel = channel::signal_a;
      out.signal_a.push_back(copy);
    } else {
      copy.channel = channel::signal_b;
      out.signal_b.push_back(copy);
    }
  }
  return out;
}

unsigned thread_budget(int shards, std::uint64_t n_chunks) {
  std::uint64_t cap =
      std::min<std::uint64_t>(static_cast<std::uint64_t>(shards), n_chunks);
  if (const char* env = std::getenv("QNODE_SIM_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1)
      cap = std::min<std::uint64_t>(cap, static_cast<std::uint64_t>(v));
  }
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  cap = std::min<std::uint64_t>(cap, hw);
  return static_cast<unsigned>(std::max<std::uint64_t>(1, cap));
}

}  // namespace

PipelineResult run_pipeline(const Scenario& sc, std::uint64_t seed) {
  sc.validate();
  const double duration = sc.run.duration;
  const auto raw_chunks =
      static_cast<std::uint64_t>(std::ceil(duration / kChunkDuration - 1e-12));
  const std::uint64_t chunks = std::max<std::uint64_t>(1, raw_chunks);

  std::optional<CollapseTables> tables;
  if (sc.analysis.mode == AnalysisMode::franson)
    tables.emplace(make_tables(mz_povm(sc.analyzer_idler.to_mz()),
                               mz_povm(sc.analyzer_signal.to_mz())));

  std::vector<ChunkOutput> outs(chunks);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      std::uint64_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        double t0 = static_cast<double>(c) * kChunkDuration;
        double dur = std::min(kChunkDuration, duration - t0);
        outs[c] = simulate_chunk(sc, seed, c, t0, dur,
                                 tables ? &*tables : nullptr);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  const unsigned n_threads = thread_budget(sc.run.shards, chunks);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Deterministic merge: chunk order is fixed, the sort is stable, and the
  // acquisition gate drops anything pushed past the end by storage or
  // analyzer delays.
  auto collect = [&](std::vector<TimeTag> ChunkOutput::* member) {
    size_t total = 0;
    for (const auto& o : outs) total += (o.*member).size();
    std::vector<TimeTag> all;
    all.reserve(total);
    for (const auto& o : outs)
      all.insert(all.end(), (o.*member).begin(), (o.*member).end());
    sort_by_time(all);
    while (!all.empty() && all.back().time >= duration) all.pop_back();
    return all;
  };

  const Rng base(seed);
  PipelineResult res;
  res.duration = duration;
  {
    Rng det = base.derive(rng_stage::detector, channel::idler);
    res.idler = apply_detector(collect(&ChunkOutput::idler), sc.detector_idler,
                               duration, channel::idler, det);
  }
  {
    Rng det = base.derive(rng_stage::detector, channel::signal_a);
    res.signal_a =
        apply_detector(collect(&ChunkOutput::signal_a), sc.detector_signal,
                       duration, channel::signal_a, det);
  }
  if (sc.analysis.mode == AnalysisMode::heralded_g2) {
    Rng det = base.derive(rng_stage::detector, channel::signal_b);
    res.signal_b =
        apply_detector(collect(&ChunkOutput::signal_b), sc.detector_signal,
                       duration, channel::signal_b, det);
  }
  return res;
}

PipelineResult run_pipeline(const Scenario& sc) {
  return run_pipeline(sc, sc.run.seed);
}

DensityMatrix analytic_source_state(const SourceParams& p) {
  p.validate();
  CMatrix mixed = dephased_phi_plus(p.pump_visibility).mat();
  CMatrix white = CMatrix::Identity(4, 4) * 0.25;
  return DensityMatrix((1.0 - p.depolarized_fraction) * mixed +
                       p.depolarized_fraction * white);
}

double analysis_base_offset(const Scenario& sc) {
  return sc.memory.mode == MemoryMode::afc
             ? afc_delay(sc.memory.comb_period_delta)
             : 0.0;
}

EfficiencyEstimate estimate_efficiency(const Scenario& sc,
                                       const std::vector<TimeTag>& idler,
                                       const std::vector<TimeTag>& signal,
                                       double base_offset) {
  EfficiencyEstimate e;
  const double cw = sc.analysis.coincidence_window;
  const double tau_c = sc.source.correlation_time;
  double cond = 1.0;  // P(joint grid coincidence | idler click)
  double capture;     // correlation-tail fraction inside the window
  if (sc.analysis.mode == AnalysisMode::franson) {
    // True coincidences spread over the five slot peaks; one window covers
    // them all. Capture integrates the double-exponential tails between the
    // window edges, cell by cell.
    const double delay =
        std::max(sc.analyzer_idler.delay, sc.analyzer_signal.delay);
    e.window = 4.0 * delay + cw;
    Eigen::Matrix4d table = joint_franson_probability(
        analytic_source_state(sc.source), mz_povm(sc.analyzer_idler.to_mz()),
        mz_povm(sc.analyzer_signal.to_mz()));
    double p_idler = 1.0 - table.row(3).sum();
    double p_joint = table.topLeftCorner<3, 3>().sum();
    cond = p_joint / p_idler;
    double cap = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        double near = (2.0 - std::abs(b - a)) * delay + cw / 2.0;
        double far = (2.0 + std::abs(b - a)) * delay + cw / 2.0;
        cap += table(a, b) * (1.0 - 0.5 * std::exp(-near / tau_c) -
                              0.5 * std::exp(-far / tau_c));
      }
    capture = cap / p_joint;
  } else {
    e.window = cw;
    capture = 1.0 - std::exp(-cw / (2.0 * tau_c));
  }

  e.coincidences = static_cast<double>(
      count_coincidences(idler, signal, e.window, base_offset));
  double acc_total = 0.0;
  for (double off : sc.analysis.accidental_offsets)
    acc_total += static_cast<double>(
        count_coincidences(idler, signal, e.window, base_offset + off));
  const auto n_off = static_cast<double>(sc.analysis.accidental_offsets.size());
  e.accidental_mean = acc_total / n_off;

  const auto n_heralds = static_cast<double>(idler.size());
  e.divisor = sc.detector_signal.efficiency * sc.memory.device_transmission *
              sc.memory.extra_insertion_loss * cond * capture;
  if (sc.memory.mode == MemoryMode::afc)
    e.analytic_internal =
        afc_efficiency(afc_delay(sc.memory.comb_period_delta), sc.memory.eta0,
                       sc.memory.t2_eff);
  if (n_heralds > 0) {
    double net = e.coincidences - e.accidental_mean;
    double sigma = std::sqrt(e.coincidences + acc_total / (n_off * n_off));
    e.end_to_end = net / n_heralds;
    e.sigma_end_to_end = sigma / n_heralds;
    e.internal = e.end_to_end / e.divisor;
    e.sigma_internal = e.sigma_end_to_end / e.divisor;
  }
  return e;
}

}  // namespace qnode
