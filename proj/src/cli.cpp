#include "fedpop/cli.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fedpop/cache_sim.hpp"
#include "fedpop/codec.hpp"
#include "fedpop/csv.hpp"
#include "fedpop/data_ingest.hpp"
#include "fedpop/errors.hpp"
#include "fedpop/federated.hpp"
#include "fedpop/kernels.hpp"
#include "fedpop/predictor.hpp"
#include "fedpop/sampler.hpp"

namespace fedpop::cli {
namespace {

namespace fs = std::filesystem;

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  const std::string dir = cfg.get_string("out.dir", ".");
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  return out;
}

struct Artifacts {
  ContentCatalog catalog;
  RequestMatrix matrix;
};

Artifacts load_artifacts(const ExperimentConfig& cfg) {
  Artifacts a;
  const std::string cat_path = out_path(cfg, "catalog.csv");
  const std::string mat_path = out_path(cfg, "matrix.csv");
  std::ifstream cat(cat_path, std::ios::binary);
  if (!cat) throw io_error("missing catalog artifact: " + cat_path);
  a.catalog = read_catalog_csv(cat);
  std::ifstream mat(mat_path, std::ios::binary);
  if (!mat) throw io_error("missing matrix artifact: " + mat_path);
  a.matrix = read_matrix_csv(mat, a.catalog);
  return a;
}

RequestMatrix slice_periods(const RequestMatrix& m, int first, int count) {
  RequestMatrix out = m;
  out.counts = m.counts.middleCols(first, count).eval();
  return out;
}

SamplerConfig sampler_config(const ExperimentConfig& cfg) {
  SamplerConfig sc;
  sc.inner_steps = static_cast<int>(cfg.get_int("sampler.l", 10));
  // Default step budget targets ~500 post-burn-in samples.
  const long long auto_steps =
      static_cast<long long>(sc.inner_steps) * (500 * 5 / 4 + 2);
  sc.total_steps = cfg.get_int("sampler.s", auto_steps);
  sc.minibatch = static_cast<int>(cfg.get_int("sampler.b", 0));
  sc.step_size = cfg.get_double("sampler.h", 1e-3);
  sc.friction = cfg.get_double("sampler.d", 10.0);
  sc.burn_in = static_cast<int>(cfg.get_int("sampler.burn_in", -1));
  sc.seed = cfg.seed();
  const std::string kind = cfg.get_string("sampler.kind", "svrg");
  if (kind == "svrg") sc.kind = SamplerKind::kSvrgHmc;
  else if (kind == "hmc") sc.kind = SamplerKind::kHmc;
  else if (kind == "sghmc") sc.kind = SamplerKind::kSghmc;
  else throw std::invalid_argument("sampler.kind must be svrg|hmc|sghmc");
  return sc;
}

HyperPriors priors_from(const ExperimentConfig& cfg, int dim) {
  return HyperPriors::uniform(dim, cfg.get_double("prior.a", 1.0),
                              cfg.get_double("prior.b", 1.0));
}

PartitionStrategy partition_strategy(const ExperimentConfig& cfg) {
  const std::string s = cfg.get_string("partition.strategy", "user-hash");
  if (s == "user-hash") return PartitionStrategy::kByUserHash;
  if (s == "round-robin") return PartitionStrategy::kRoundRobin;
  throw std::invalid_argument("partition.strategy must be user-hash|round-robin");
}

// Holdout-scored running forecast: mean of e^{lambda} over the samples a
// finished run would keep (post burn-in), falling back to the current
// position before the first such sample lands.
class RunningRmse {
 public:
  RunningRmse(Eigen::VectorXd holdout, int burn)
      : holdout_(std::move(holdout)), burn_(burn) {}

  double update(const ParameterVector& tau, bool sample_collected) {
    const int F = static_cast<int>(holdout_.size());
    Eigen::VectorXd el(F);
    kernels::active().vexp(tau.lambda().data(), el.data(), F);
    if (sample_collected) {
      ++collected_;
      if (collected_ > burn_) {
        if (sum_.size() == 0) sum_ = Eigen::VectorXd::Zero(F);
        sum_ += el;
        ++kept_;
      }
    }
    const Eigen::VectorXd pred = kept_ > 0 ? (sum_ / kept_).eval() : el;
    return rmse(pred, holdout_);
  }

 private:
  Eigen::VectorXd holdout_;
  int burn_ = 0;
  int collected_ = 0;
  int kept_ = 0;
  Eigen::VectorXd sum_;
};

std::vector<RequestMatrix> federated_node_matrices(const ExperimentConfig& cfg,
                                                   const Artifacts& art,
                                                   int num_nodes) {
  const auto events = parse_events_file(cfg.require_string("data.events"));
  const auto partition = make_partition(events, num_nodes,
                                        partition_strategy(cfg), cfg.seed());
  return partition_matrices(events, art.catalog, partition,
                            art.matrix.period_length, art.matrix.num_periods(),
                            art.matrix.origin);
}

void write_round_log(std::ostream& out, const ExperimentConfig& cfg,
                     const std::vector<std::array<double, 4>>& rows) {
  out << "# " << cfg.provenance() << "\n";
  out << "round,rmse_holdout,cumulative_bits,neg_log_posterior\n";
  for (const auto& r : rows) {
    out << static_cast<long long>(r[0]) << ',' << format_double(r[1]) << ','
        << static_cast<long long>(r[2]) << ',' << format_double(r[3]) << "\n";
  }
}

}  // namespace

void cmd_ingest(const ExperimentConfig& cfg) {
  const int q = static_cast<int>(cfg.get_int("q", 10));
  const auto catalog = parse_items_file(cfg.require_string("data.items"), q);
  const auto events = parse_events_file(cfg.require_string("data.events"));

  const double period_seconds = cfg.get_double("period.hours", 12.0) * 3600.0;
  int num_periods = static_cast<int>(cfg.get_int("n", 0));
  if (num_periods <= 0) {
    // Cover the whole event span when n is not pinned.
    std::int64_t lo = 0, hi = 0;
    if (!events.empty()) {
      lo = hi = events.front().timestamp;
      for (const auto& e : events) {
        lo = std::min(lo, e.timestamp);
        hi = std::max(hi, e.timestamp);
      }
    }
    num_periods =
        1 + static_cast<int>(static_cast<double>(hi - lo) / period_seconds);
  }
  const auto matrix = bin_requests(events, catalog, period_seconds, num_periods);
  if (matrix.dropped_outside > 0)
    std::cerr << "warning: dropped " << matrix.dropped_outside
              << " events outside the period window\n";
  if (matrix.dropped_unknown > 0)
    std::cerr << "warning: dropped " << matrix.dropped_unknown
              << " events for unknown contents\n";

  auto cat_out = open_out(out_path(cfg, "catalog.csv"));
  write_catalog_csv(cat_out, catalog, cfg.provenance());
  auto mat_out = open_out(out_path(cfg, "matrix.csv"));
  write_matrix_csv(mat_out, catalog, matrix, cfg.provenance());
}

void cmd_train(const ExperimentConfig& cfg) {
  const Artifacts art = load_artifacts(cfg);
  const int N = art.matrix.num_periods();
  if (N < 2)
    throw std::invalid_argument("training needs at least two periods "
                                "(the last one is held out)");
  const RequestMatrix train = slice_periods(art.matrix, 0, N - 1);
  const Eigen::VectorXd holdout = art.matrix.counts.col(N - 1);

  const HyperPriors priors = priors_from(cfg, art.catalog.feature_dim() + 2);
  const Model model(art.catalog, train, priors);
  SamplerConfig sc = sampler_config(cfg);
  sc.validate(model.num_data_terms());

  const std::string mode = cfg.get_string("mode", "local");
  RunningRmse tracker(holdout, sc.resolved_burn_in());
  std::vector<std::array<double, 4>> log_rows;

  SampleChain chain;
  if (mode == "local") {
    chain = run_sampler(model, sc, {}, [&](const RoundRecord& rec) {
      const double r = tracker.update(*rec.tau, rec.sample_collected);
      log_rows.push_back({static_cast<double>(rec.outer_round), r, 0.0,
                          rec.neg_log_posterior});
    });
  } else if (mode == "federated-native" || mode == "federated-quantized") {
    const int m = static_cast<int>(cfg.get_int("m", 5));
    FederatedConfig fc;
    fc.sampler = sc;
    fc.mode = mode == "federated-native" ? FederatedMode::kNative
                                         : FederatedMode::kQuantized;
    fc.quant_level = static_cast<std::uint32_t>(cfg.get_int("quant.s", 4096));
    fc.weighting = cfg.get_string("federated.weighting", "uniform") == "data-size"
                       ? AggregationWeighting::kDataSize
                       : AggregationWeighting::kUniform;
    fc.participants_per_round =
        static_cast<int>(cfg.get_int("federated.participants", 0));
    const auto nodes = federated_node_matrices(cfg, art, m);
    std::vector<RequestMatrix> node_train;
    node_train.reserve(nodes.size());
    for (const auto& nm : nodes) node_train.push_back(slice_periods(nm, 0, N - 1));
    const auto result = run_federated(
        model, art.catalog, node_train, priors, fc,
        [&](const FederatedRoundRecord& rec) {
          const double r = tracker.update(*rec.tau, rec.sample_collected);
          log_rows.push_back({static_cast<double>(rec.outer_round), r,
                              static_cast<double>(rec.cumulative_bits),
                              rec.neg_log_posterior});
        });
    chain = result.chain;
  } else {
    throw std::invalid_argument(
        "mode must be local|federated-native|federated-quantized");
  }

  {
    auto log_out = open_out(out_path(cfg, "round_log.csv"));
    write_round_log(log_out, cfg, log_rows);
    auto chain_out = open_out(out_path(cfg, "chain.csv"));
    save_chain(chain_out, chain, cfg.provenance());
  }
  if (chain.diverged)
    throw numerical_error("training diverged: " + chain.divergence_message +
                          " (partial artifacts retained)");
}

void cmd_predict(const ExperimentConfig& cfg) {
  const std::string chain_path =
      cfg.get_string("checkpoint", out_path(cfg, "chain.csv"));
  std::ifstream chain_in(chain_path, std::ios::binary);
  if (!chain_in) throw io_error("missing checkpoint: " + chain_path);
  const SampleChain chain = load_chain(chain_in);
  if (chain.empty()) throw numerical_error("checkpoint holds no samples");

  const Artifacts art = load_artifacts(cfg);
  if (chain.num_contents != art.catalog.num_contents())
    throw std::invalid_argument("checkpoint does not match the catalog");

  const PopularityForecast forecast = predict_seen(chain);
  const int N = art.matrix.num_periods();
  const Eigen::VectorXd actual = art.matrix.counts.col(N - 1);

  {
    auto out = open_out(out_path(cfg, "forecast.csv"));
    out << "# " << cfg.provenance() << "\n";
    out << "content_id,predicted,actual,abs_error\n";
    for (int f = 0; f < art.catalog.num_contents(); ++f) {
      out << art.catalog.content_ids[f] << ','
          << format_double(forecast.predicted[f]) << ','
          << format_double(actual[f]) << ','
          << format_double(std::abs(forecast.predicted[f] - actual[f])) << "\n";
    }
  }

  if (cfg.has("predict.unseen")) {
    const std::string path = cfg.require_string("predict.unseen");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open unseen-features file: " + path);
    const int q = art.catalog.feature_dim();
    auto out = open_out(out_path(cfg, "forecast_unseen.csv"));
    out << "# " << cfg.provenance() << "\n";
    out << "query,predicted\n";
    std::string line;
    long line_no = 0;
    int written = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::istringstream row(line);
      std::string cell;
      std::vector<double> vals;
      while (std::getline(row, cell, ',')) {
        try {
          vals.push_back(std::stod(cell));
        } catch (...) {
          throw io_error("bad feature value in unseen file", line_no);
        }
      }
      if (static_cast<int>(vals.size()) != q)
        throw std::invalid_argument(
            "unseen feature row has " + std::to_string(vals.size()) +
            " values; expected Q=" + std::to_string(q));
      Eigen::VectorXd x(q);
      for (int i = 0; i < q; ++i) x[i] = vals[i];
      out << written++ << ','
          << format_double(predict_unseen(chain, x, art.catalog)) << "\n";
    }
  }
}

void cmd_cache_sweep(const ExperimentConfig& cfg, bool plot) {
  const Artifacts art = load_artifacts(cfg);
  const int N = art.matrix.num_periods();
  if (N < 2) throw std::invalid_argument("cache sweep needs a held-out period");
  const int F = art.catalog.num_contents();

  // Held-out trace: the final period's events, one request per event.
  auto events = parse_events_file(cfg.require_string("data.events"));
  std::stable_sort(events.begin(), events.end(),
                   [](const RawEvent& a, const RawEvent& b) {
                     return a.timestamp < b.timestamp;
                   });
  std::vector<CacheRequest> trace;
  for (const auto& e : events) {
    const int f = art.catalog.index_of(e.item_id);
    if (f < 0) continue;
    const auto period = static_cast<std::int64_t>(std::floor(
        static_cast<double>(e.timestamp - art.matrix.origin) /
        art.matrix.period_length));
    if (period == N - 1) trace.push_back(CacheRequest{f, static_cast<int>(period)});
  }

  SweepSpec spec;
  spec.library_size = F;
  spec.relative_sizes = cfg.get_double_list(
      "cache.sizes", {0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5});
  spec.random_seeds = static_cast<int>(cfg.get_int("cache.random_seeds", 20));
  spec.seed = cfg.seed();
  spec.policies = {CachePolicy::kArPrefill, CachePolicy::kLru, CachePolicy::kLfu,
                   CachePolicy::kFifo, CachePolicy::kRandom};

  // Prediction ranking comes from the forecast artifact when present.
  const std::string forecast_path =
      cfg.get_string("cache.forecast", out_path(cfg, "forecast.csv"));
  std::ifstream fin(forecast_path, std::ios::binary);
  if (fin) {
    Eigen::VectorXd scores = Eigen::VectorXd::Zero(F);
    std::string line;
    int row = 0;
    bool header = false;
    while (std::getline(fin, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (!header) {
        header = true;
        continue;
      }
      const auto comma = line.find(',');
      const auto comma2 = line.find(',', comma + 1);
      if (comma == std::string::npos || row >= F) continue;
      scores[row++] = std::stod(line.substr(comma + 1, comma2 - comma - 1));
    }
    const auto ranked = ranking_from_scores(scores);
    spec.prediction_ranking = [ranked](int) { return ranked; };
    spec.policies.insert(spec.policies.begin(), CachePolicy::kPredictionPrefill);
  } else {
    std::cerr << "warning: no forecast artifact at " << forecast_path
              << "; prediction policy skipped\n";
  }

  const RequestMatrix train = slice_periods(art.matrix, 0, N - 1);
  const int ar_order = static_cast<int>(cfg.get_int("ar.order", 3));
  const auto ar_scores = ar_baseline(train, ar_order).predicted;
  const auto ar_ranked = ranking_from_scores(ar_scores);
  spec.ar_ranking = [ar_ranked](int) { return ar_ranked; };

  const auto curve = sweep(trace, spec);
  {
    auto out = open_out(out_path(cfg, "cache_curve.csv"));
    out << "# " << cfg.provenance() << "\n";
    out << "policy,relative_size,hit_rate,hits,total\n";
    for (const auto& pt : curve) {
      out << policy_name(pt.policy) << ',' << format_double(pt.relative_size)
          << ',' << format_double(pt.hit_rate) << ',' << format_double(pt.hits)
          << ',' << pt.total << "\n";
    }
  }

  if (plot || cfg.get_bool("cache.plot", false)) {
    auto svg = open_out(out_path(cfg, "cache_curve.svg"));
    const int w = 640, h = 420, margin = 50;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w
        << "' height='" << h << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<line x1='" << margin << "' y1='" << h - margin << "' x2='"
        << w - margin << "' y2='" << h - margin << "' stroke='black'/>\n";
    svg << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin
        << "' y2='" << h - margin << "' stroke='black'/>\n";
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                            "#d62728", "#9467bd", "#8c564b"};
    double max_rel = 0.0;
    for (const auto& pt : curve) max_rel = std::max(max_rel, pt.relative_size);
    int color = 0;
    for (const CachePolicy policy : spec.policies) {
      std::ostringstream pts;
      for (const auto& pt : curve) {
        if (pt.policy != policy) continue;
        const double x = margin + (w - 2 * margin) * (pt.relative_size / max_rel);
        const double y = (h - margin) - (h - 2 * margin) * pt.hit_rate;
        pts << x << ',' << y << ' ';
      }
      svg << "<polyline fill='none' stroke='" << colors[color % 6]
          << "' stroke-width='2' points='" << pts.str() << "'/>\n";
      svg << "<text x='" << w - margin + 4 << "' y='" << margin + 14 * color
          << "' font-size='11' fill='" << colors[color % 6] << "'>"
          << policy_name(policy) << "</text>\n";
      ++color;
    }
    svg << "</svg>\n";
  }
}

void cmd_comm_bench(const ExperimentConfig& cfg,
                    const std::vector<std::uint32_t>& level_grid) {
  const Artifacts art = load_artifacts(cfg);
  const int N = art.matrix.num_periods();
  if (N < 2) throw std::invalid_argument("comm bench needs a held-out period");
  const RequestMatrix train = slice_periods(art.matrix, 0, N - 1);
  const Eigen::VectorXd holdout = art.matrix.counts.col(N - 1);

  const HyperPriors priors = priors_from(cfg, art.catalog.feature_dim() + 2);
  const Model model(art.catalog, train, priors);
  SamplerConfig sc = sampler_config(cfg);
  sc.validate(model.num_data_terms());

  const int m = static_cast<int>(cfg.get_int("m", 5));
  const auto nodes_full = federated_node_matrices(cfg, art, m);
  std::vector<RequestMatrix> node_train;
  node_train.reserve(nodes_full.size());
  for (const auto& nm : nodes_full)
    node_train.push_back(slice_periods(nm, 0, N - 1));

  auto out = open_out(out_path(cfg, "comm_bench.csv"));
  out << "# " << cfg.provenance() << "\n";
  out << "s,round,cumulative_bits,rmse\n";  // s=0 marks the unquantized run

  const auto run_one = [&](std::uint32_t level) {
    FederatedConfig fc;
    fc.sampler = sc;
    fc.mode = level == 0 ? FederatedMode::kNative : FederatedMode::kQuantized;
    fc.quant_level = level == 0 ? 1 : level;
    RunningRmse tracker(holdout, sc.resolved_burn_in());
    run_federated(model, art.catalog, node_train, priors, fc,
                  [&](const FederatedRoundRecord& rec) {
                    const double r =
                        tracker.update(*rec.tau, rec.sample_collected);
                    out << level << ',' << rec.outer_round << ','
                        << rec.cumulative_bits << ',' << format_double(r)
                        << "\n";
                  });
  };

  run_one(0);
  for (const std::uint32_t s : level_grid) {
    if (s < 1) throw std::invalid_argument("quantization level must be >= 1");
    run_one(s);
  }
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Popularity prediction and cache simulation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "key=value config file");
  app.add_option("-D,--set", overrides, "config override key=value");

  auto* ingest = app.add_subcommand("ingest", "parse raw data into artifacts");
  auto* train = app.add_subcommand("train", "sample the posterior");
  auto* predict = app.add_subcommand("predict", "forecast from a checkpoint");
  auto* sweep_cmd = app.add_subcommand("cache-sweep", "hit-rate curves");
  auto* bench = app.add_subcommand("comm-bench", "RMSE versus bits");

  bool plot = false;
  sweep_cmd->add_flag("--plot", plot, "also render an SVG plot");
  std::string grid_arg = "1024,4096";
  bench->add_option("--s-grid", grid_arg,
                    "comma-separated quantization levels (may be empty)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = ExperimentConfig::from_file(config_path);
    for (const auto& kv : overrides) cfg.apply_override(kv);

    if (ingest->parsed()) cmd_ingest(cfg);
    if (train->parsed()) cmd_train(cfg);
    if (predict->parsed()) cmd_predict(cfg);
    if (sweep_cmd->parsed()) cmd_cache_sweep(cfg, plot);
    if (bench->parsed()) {
      std::vector<std::uint32_t> grid;
      std::istringstream ss(grid_arg);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        if (cell.empty()) continue;
        grid.push_back(static_cast<std::uint32_t>(std::stoul(cell)));
      }
      cmd_comm_bench(cfg, grid);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace fedpop::cli
