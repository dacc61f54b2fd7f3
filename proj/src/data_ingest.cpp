#include "fedpop/data_ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fedpop/csv.hpp"
#include "fedpop/errors.hpp"
#include "fedpop/rng.hpp"

namespace fedpop {
namespace {

constexpr int kGenreFlags = 19;

bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Release dates look like "01-Jan-1995"; only the year matters here.
bool parse_release_year(std::string_view field, int& year) {
  const std::size_t pos = field.rfind('-');
  if (pos == std::string_view::npos || pos + 1 >= field.size()) return false;
  long long y = 0;
  if (!parse_int(field.substr(pos + 1), y)) return false;
  year = static_cast<int>(y);
  return true;
}

}  // namespace

int ContentCatalog::index_of(int content_id) const {
  const auto it =
      std::lower_bound(content_ids.begin(), content_ids.end(), content_id);
  if (it == content_ids.end() || *it != content_id) return -1;
  return static_cast<int>(it - content_ids.begin());
}

std::vector<RawEvent> parse_events(std::istream& in) {
  std::vector<RawEvent> events;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    long long user = 0, item = 0, rating = 0, ts = 0;
    if (fields.size() != 4 || !parse_int(fields[0], user) ||
        !parse_int(fields[1], item) || !parse_int(fields[2], rating) ||
        !parse_int(fields[3], ts)) {
      throw io_error("malformed event row", line_no);
    }
    if (rating < 1 || rating > 5)
      throw io_error("rating outside [1,5]", line_no);
    if (item < 1) throw io_error("item id must be positive", line_no);
    events.push_back(RawEvent{static_cast<int>(user), static_cast<int>(item),
                              static_cast<int>(rating), ts});
  }
  return events;
}

std::vector<RawEvent> parse_events_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open events file: " + path);
  return parse_events(in);
}

ContentCatalog parse_items(std::istream& in, int target_dim) {
  if (target_dim < 3)
    throw std::invalid_argument(
        "feature dimension must be >= 3 (genres + year + bias)");

  struct Item {
    int id;
    int year;
    bool has_year;
    std::array<int, kGenreFlags> flags;
  };
  std::vector<Item> items;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split(line, '|');
    // id | title | release date | video release date | url | 19 genre flags
    if (fields.size() < 5 + kGenreFlags)
      throw io_error("item row missing genre flags", line_no);
    long long id = 0;
    if (!parse_int(fields[0], id) || id < 1)
      throw io_error("bad item id", line_no);
    Item it{};
    it.id = static_cast<int>(id);
    it.has_year = parse_release_year(fields[2], it.year);
    const std::size_t base = fields.size() - kGenreFlags;
    for (int g = 0; g < kGenreFlags; ++g) {
      long long v = 0;
      if (!parse_int(fields[base + g], v) || (v != 0 && v != 1))
        throw io_error("genre flag must be 0 or 1", line_no);
      it.flags[g] = static_cast<int>(v);
    }
    items.push_back(it);
  }

  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.id < b.id; });

  // Most frequent genres in this corpus, ties broken by ascending column
  // index so the mapping is stable.
  std::array<long, kGenreFlags> freq{};
  for (const auto& it : items)
    for (int g = 0; g < kGenreFlags; ++g) freq[g] += it.flags[g];
  std::vector<int> order(kGenreFlags);
  for (int g = 0; g < kGenreFlags; ++g) order[g] = g;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return freq[a] > freq[b]; });
  const int num_genres = target_dim - 2;
  std::vector<int> chosen(order.begin(),
                          order.begin() + std::min<int>(num_genres, kGenreFlags));
  std::sort(chosen.begin(), chosen.end());

  int ymin = std::numeric_limits<int>::max();
  int ymax = std::numeric_limits<int>::min();
  for (const auto& it : items) {
    if (!it.has_year) continue;
    ymin = std::min(ymin, it.year);
    ymax = std::max(ymax, it.year);
  }
  if (items.empty() || ymin > ymax) {
    ymin = 0;
    ymax = 0;
  }

  ContentCatalog catalog;
  catalog.genre_columns = chosen;
  catalog.year_min = ymin;
  catalog.year_max = ymax;
  catalog.content_ids.reserve(items.size());
  catalog.sizes.assign(items.size(), 1.0);
  catalog.features.resize(static_cast<int>(items.size()), target_dim);
  for (std::size_t f = 0; f < items.size(); ++f) {
    const auto& it = items[f];
    catalog.content_ids.push_back(it.id);
    int col = 0;
    for (int g : chosen) catalog.features(f, col++) = it.flags[g];
    for (; col < num_genres; ++col) catalog.features(f, col) = 0.0;
    const double span = ymax > ymin ? static_cast<double>(ymax - ymin) : 1.0;
    catalog.features(f, num_genres) =
        it.has_year ? (it.year - ymin) / span : 0.0;
    catalog.features(f, num_genres + 1) = 1.0;
  }
  return catalog;
}

ContentCatalog parse_items_file(const std::string& path, int target_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open items file: " + path);
  return parse_items(in, target_dim);
}

RequestMatrix bin_requests(const std::vector<RawEvent>& events,
                           const ContentCatalog& catalog,
                           double period_length_seconds, int num_periods,
                           std::int64_t origin) {
  if (period_length_seconds <= 0)
    throw std::invalid_argument("period length must be positive");
  if (num_periods < 1)
    throw std::invalid_argument("need at least one period");

  RequestMatrix m;
  m.period_length = period_length_seconds;
  m.counts = Eigen::MatrixXd::Zero(catalog.num_contents(), num_periods);

  if (origin < 0) {
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    for (const auto& e : events) lo = std::min(lo, e.timestamp);
    origin = events.empty() ? 0 : lo;
  }
  m.origin = origin;

  for (const auto& e : events) {
    const int f = catalog.index_of(e.item_id);
    if (f < 0) {
      ++m.dropped_unknown;
      continue;
    }
    const double offset = static_cast<double>(e.timestamp - origin);
    const auto period = static_cast<std::int64_t>(
        std::floor(offset / period_length_seconds));
    if (period < 0 || period >= num_periods) {
      ++m.dropped_outside;
      continue;
    }
    m.counts(f, static_cast<int>(period)) += e.rating;
  }
  return m;
}

Partition make_partition(const std::vector<RawEvent>& events, int num_nodes,
                         PartitionStrategy strategy, std::uint64_t seed) {
  if (num_nodes < 1) throw std::invalid_argument("need at least one node");
  Partition p;
  p.num_nodes = num_nodes;
  p.node_of_event.resize(events.size());
  for (std::size_t k = 0; k < events.size(); ++k) {
    switch (strategy) {
      case PartitionStrategy::kByUserHash: {
        const std::uint64_t h = splitmix64(
            derive_seed(seed, RngStream::kPartition, events[k].user_id));
        p.node_of_event[k] = static_cast<int>(h % num_nodes) + 1;
        break;
      }
      case PartitionStrategy::kRoundRobin:
        p.node_of_event[k] = static_cast<int>(k % num_nodes) + 1;
        break;
    }
  }
  return p;
}

std::vector<RequestMatrix> partition_matrices(
    const std::vector<RawEvent>& events, const ContentCatalog& catalog,
    const Partition& partition, double period_length_seconds, int num_periods,
    std::int64_t origin) {
  if (partition.node_of_event.size() != events.size())
    throw std::invalid_argument("partition does not match the event list");
  std::vector<std::vector<RawEvent>> per_node(partition.num_nodes);
  for (std::size_t k = 0; k < events.size(); ++k)
    per_node[partition.node_of_event[k] - 1].push_back(events[k]);
  std::vector<RequestMatrix> out;
  out.reserve(partition.num_nodes);
  for (int m = 0; m < partition.num_nodes; ++m)
    out.push_back(bin_requests(per_node[m], catalog, period_length_seconds,
                               num_periods, origin));
  return out;
}

void write_catalog_csv(std::ostream& out, const ContentCatalog& catalog,
                       const std::string& provenance_comment) {
  out << "# " << provenance_comment << "\n";
  out << "# genre_columns=";
  for (std::size_t i = 0; i < catalog.genre_columns.size(); ++i)
    out << (i ? ";" : "") << catalog.genre_columns[i];
  out << " year_min=" << catalog.year_min << " year_max=" << catalog.year_max
      << "\n";
  out << "content_id";
  for (int q = 0; q < catalog.feature_dim(); ++q) out << ",feat_" << q;
  out << "\n";
  for (int f = 0; f < catalog.num_contents(); ++f) {
    out << catalog.content_ids[f];
    for (int q = 0; q < catalog.feature_dim(); ++q)
      out << ',' << format_double(catalog.features(f, q));
    out << "\n";
  }
}

void write_matrix_csv(std::ostream& out, const ContentCatalog& catalog,
                      const RequestMatrix& matrix,
                      const std::string& provenance_comment) {
  out << "# " << provenance_comment << "\n";
  out << "# origin=" << matrix.origin
      << " period_seconds=" << format_double(matrix.period_length) << "\n";
  out << "content_id";
  for (int n = 0; n < matrix.num_periods(); ++n) out << ",period_" << n;
  out << "\n";
  for (int f = 0; f < matrix.num_contents(); ++f) {
    out << catalog.content_ids[f];
    for (int n = 0; n < matrix.num_periods(); ++n)
      out << ',' << format_double(matrix.counts(f, n));
    out << "\n";
  }
}

namespace {

std::vector<std::string> read_csv_rows(std::istream& in,
                                       std::string* header_meta) {
  std::vector<std::string> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header_meta) *header_meta += line + "\n";
      continue;
    }
    if (!header_seen) {  // column header row
      header_seen = true;
      continue;
    }
    rows.push_back(line);
  }
  return rows;
}

}  // namespace

ContentCatalog read_catalog_csv(std::istream& in) {
  std::string meta;
  const auto rows = read_csv_rows(in, &meta);
  ContentCatalog catalog;
  long line_no = 0;
  std::vector<std::vector<double>> feats;
  for (const auto& row : rows) {
    ++line_no;
    const auto fields = split(row, ',');
    if (fields.size() < 2) throw io_error("catalog row too short", line_no);
    long long id = 0;
    if (!parse_int(fields[0], id)) throw io_error("bad content id", line_no);
    catalog.content_ids.push_back(static_cast<int>(id));
    std::vector<double> f;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      auto [ptr, ec] =
          std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), v);
      if (ec != std::errc() || ptr != fields[i].data() + fields[i].size())
        throw io_error("bad feature value", line_no);
      f.push_back(v);
    }
    if (!feats.empty() && f.size() != feats.front().size())
      throw io_error("inconsistent feature dimension", line_no);
    feats.push_back(std::move(f));
  }
  const int F = static_cast<int>(feats.size());
  const int Q = F > 0 ? static_cast<int>(feats.front().size()) : 0;
  catalog.features.resize(F, Q);
  for (int f = 0; f < F; ++f)
    for (int q = 0; q < Q; ++q) catalog.features(f, q) = feats[f][q];
  catalog.sizes.assign(F, 1.0);
  return catalog;
}

RequestMatrix read_matrix_csv(std::istream& in, const ContentCatalog& catalog) {
  std::string meta;
  const auto rows = read_csv_rows(in, &meta);
  if (static_cast<int>(rows.size()) != catalog.num_contents())
    throw io_error("matrix row count does not match catalog");
  RequestMatrix m;
  {  // recover binning metadata when present
    std::istringstream ms(meta);
    std::string tok;
    while (ms >> tok) {
      if (tok.rfind("origin=", 0) == 0)
        m.origin = std::stoll(tok.substr(7));
      else if (tok.rfind("period_seconds=", 0) == 0)
        m.period_length = std::stod(tok.substr(15));
    }
  }
  long line_no = 0;
  std::vector<std::vector<double>> counts;
  for (const auto& row : rows) {
    ++line_no;
    const auto fields = split(row, ',');
    if (fields.size() < 2) throw io_error("matrix row too short", line_no);
    std::vector<double> c;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      auto [ptr, ec] =
          std::from_chars(fields[i].data(), fields[i].data() + fields[i].size(), v);
      if (ec != std::errc() || ptr != fields[i].data() + fields[i].size())
        throw io_error("bad count value", line_no);
      if (v < 0) throw io_error("negative count", line_no);
      c.push_back(v);
    }
    if (!counts.empty() && c.size() != counts.front().size())
      throw io_error("inconsistent period count", line_no);
    counts.push_back(std::move(c));
  }
  const int F = static_cast<int>(counts.size());
  const int N = F > 0 ? static_cast<int>(counts.front().size()) : 0;
  m.counts.resize(F, N);
  for (int f = 0; f < F; ++f)
    for (int n = 0; n < N; ++n) m.counts(f, n) = counts[f][n];
  return m;
}

}  // namespace fedpop
