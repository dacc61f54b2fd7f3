#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "fedpop/data_ingest.hpp"
#include "fedpop/errors.hpp"

using namespace fedpop;

namespace {

// Minimal u.item row: id|title|date|video date|url|19 flags.
std::string item_row(int id, const std::string& date,
                     const std::string& flags19) {
  return std::to_string(id) + "|T|" + date + "||u|" + flags19;
}

const std::string kZeros = "0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0";

ContentCatalog two_item_catalog() {
  std::istringstream in(item_row(1, "01-Jan-1995", kZeros) + "\n" +
                        item_row(2, "01-Jan-1990", kZeros) + "\n");
  return parse_items(in, 10);
}

}  // namespace

TEST_CASE("parse_events reads tab-separated rows in order") {
  std::istringstream in("196\t242\t3\t881250949\n186\t302\t3\t891717742\n");
  const auto events = parse_events(in);
  REQUIRE(events.size() == 2);
  CHECK(events[0].user_id == 196);
  CHECK(events[0].item_id == 242);
  CHECK(events[0].rating == 3);
  CHECK(events[0].timestamp == 881250949);
  CHECK(events[1].item_id == 302);
}

TEST_CASE("parse_events on empty input yields an empty list") {
  std::istringstream in("");
  CHECK(parse_events(in).empty());
}

TEST_CASE("parse_events reports the offending line") {
  std::istringstream in("a\tb\tc\n");
  try {
    parse_events(in);
    FAIL("expected a parse error");
  } catch (const io_error& e) {
    CHECK(e.line() == 1);
  }
}

TEST_CASE("parse_events rejects out-of-range ratings") {
  std::istringstream in("1\t1\t9\t100\n");
  CHECK_THROWS_AS(parse_events(in), io_error);
}

TEST_CASE("parsing is pure: same bytes give the same structures") {
  const std::string bytes = "1\t5\t4\t100\n2\t5\t1\t200\n";
  std::istringstream a(bytes), b(bytes);
  const auto ea = parse_events(a);
  const auto eb = parse_events(b);
  REQUIRE(ea.size() == eb.size());
  for (std::size_t i = 0; i < ea.size(); ++i) {
    CHECK(ea[i].user_id == eb[i].user_id);
    CHECK(ea[i].item_id == eb[i].item_id);
    CHECK(ea[i].rating == eb[i].rating);
    CHECK(ea[i].timestamp == eb[i].timestamp);
  }
}

TEST_CASE("parse_items builds Q-dimensional features") {
  std::istringstream in(
      item_row(1, "01-Jan-1995", "1|1|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0") +
      "\n" +
      item_row(2, "01-Jan-1990", "1|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0") +
      "\n");
  const auto catalog = parse_items(in, 10);
  REQUIRE(catalog.num_contents() == 2);
  CHECK(catalog.feature_dim() == 10);
  // bias component is constant 1
  CHECK(catalog.features(0, 9) == 1.0);
  CHECK(catalog.features(1, 9) == 1.0);
  // min-max year normalization: 1990 -> 0, 1995 -> 1
  CHECK(catalog.features(0, 8) == 1.0);
  CHECK(catalog.features(1, 8) == 0.0);
}

TEST_CASE("items with identical flags get identical features") {
  const std::string flags = "0|1|0|1|0|0|0|0|0|0|0|0|0|0|0|0|0|0|0";
  std::istringstream in(item_row(1, "01-Jan-1995", flags) + "\n" +
                        item_row(2, "01-Jan-1995", flags) + "\n");
  const auto catalog = parse_items(in, 10);
  CHECK(catalog.features.row(0) == catalog.features.row(1));
}

TEST_CASE("all-zero genre flags produce all-zero genre components") {
  std::istringstream in(item_row(1, "01-Jan-1995", kZeros) + "\n");
  const auto catalog = parse_items(in, 10);
  for (int q = 0; q < 8; ++q) CHECK(catalog.features(0, q) == 0.0);
}

TEST_CASE("missing genre flags raise a parse error") {
  std::istringstream in("1|T|01-Jan-1995||u|0|1\n");
  CHECK_THROWS_AS(parse_items(in, 10), io_error);
}

TEST_CASE("bin_requests sums ratings per period") {
  const auto catalog = two_item_catalog();
  std::vector<RawEvent> events = {
      {1, 1, 3, 1000},            // period 0
      {2, 1, 2, 1000 + 43200},    // period 1
      {3, 1, 5, 1000 + 43300},    // period 1, same content
  };
  const auto m = bin_requests(events, catalog, 43200.0, 2);
  CHECK(m.counts(0, 0) == 3.0);
  CHECK(m.counts(0, 1) == 7.0);  // 2 + 5
  CHECK(m.counts(1, 0) == 0.0);
}

TEST_CASE("bin_requests with no events is an all-zero matrix") {
  const auto catalog = two_item_catalog();
  const auto m = bin_requests({}, catalog, 43200.0, 4);
  CHECK(m.counts.isZero());
}

TEST_CASE("events outside the window are dropped and counted") {
  const auto catalog = two_item_catalog();
  std::vector<RawEvent> events = {
      {1, 1, 3, 0},
      {1, 1, 4, 500000},  // beyond 2 periods of 43200s
  };
  const auto m = bin_requests(events, catalog, 43200.0, 2, 0);
  CHECK(m.dropped_outside == 1);
  CHECK(m.counts.sum() == 3.0);
}

TEST_CASE("binning then summing periods equals summing ratings directly") {
  const auto catalog = two_item_catalog();
  std::vector<RawEvent> events;
  std::int64_t t = 0;
  double direct_sum[2] = {0, 0};
  for (int k = 0; k < 40; ++k) {
    const int item = 1 + k % 2;
    const int rating = 1 + (k * 7) % 5;
    events.push_back({k, item, rating, t});
    direct_sum[item - 1] += rating;
    t += 10000;
  }
  const auto m = bin_requests(events, catalog, 43200.0, 10, 0);
  CHECK(m.counts.row(0).sum() == direct_sum[0]);
  CHECK(m.counts.row(1).sum() == direct_sum[1]);
}

TEST_CASE("partition requires at least one node") {
  CHECK_THROWS_AS(make_partition({}, 0, PartitionStrategy::kRoundRobin, 1),
                  std::invalid_argument);
}

TEST_CASE("M=1 assigns everything to node 1") {
  std::vector<RawEvent> events(10, RawEvent{1, 1, 1, 0});
  const auto p = make_partition(events, 1, PartitionStrategy::kByUserHash, 9);
  for (const int node : p.node_of_event) CHECK(node == 1);
}

TEST_CASE("round robin spreads events evenly") {
  std::vector<RawEvent> events(100, RawEvent{1, 1, 1, 0});
  const auto p = make_partition(events, 5, PartitionStrategy::kRoundRobin, 0);
  int counts[5] = {0};
  for (const int node : p.node_of_event) ++counts[node - 1];
  for (const int c : counts) CHECK(c == 20);
}

TEST_CASE("user-hash partition is stable across runs") {
  std::vector<RawEvent> events;
  for (int k = 0; k < 50; ++k) events.push_back({k % 9, 1, 1, 0});
  const auto a = make_partition(events, 5, PartitionStrategy::kByUserHash, 42);
  const auto b = make_partition(events, 5, PartitionStrategy::kByUserHash, 42);
  CHECK(a.node_of_event == b.node_of_event);
  // same user, same node
  for (std::size_t i = 0; i < events.size(); ++i)
    for (std::size_t j = 0; j < events.size(); ++j)
      if (events[i].user_id == events[j].user_id)
        CHECK(a.node_of_event[i] == a.node_of_event[j]);
}

TEST_CASE("node matrices sum to the global matrix element-wise") {
  const auto catalog = two_item_catalog();
  std::vector<RawEvent> events;
  for (int k = 0; k < 200; ++k)
    events.push_back({k % 17, 1 + k % 2, 1 + k % 5,
                      static_cast<std::int64_t>(k) * 2000});
  const auto global = bin_requests(events, catalog, 43200.0, 10, 0);
  const auto part = make_partition(events, 4, PartitionStrategy::kByUserHash, 3);
  const auto locals =
      partition_matrices(events, catalog, part, 43200.0, 10, 0);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(2, 10);
  for (const auto& m : locals) sum += m.counts;
  CHECK((sum - global.counts).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("catalog and matrix survive a CSV round trip") {
  const auto catalog = two_item_catalog();
  std::vector<RawEvent> events = {{1, 1, 3, 0}, {2, 2, 5, 50000}};
  const auto m = bin_requests(events, catalog, 43200.0, 3, 0);

  std::ostringstream cat_out, mat_out;
  write_catalog_csv(cat_out, catalog, "test");
  write_matrix_csv(mat_out, catalog, m, "test");

  std::istringstream cat_in(cat_out.str()), mat_in(mat_out.str());
  const auto catalog2 = read_catalog_csv(cat_in);
  const auto m2 = read_matrix_csv(mat_in, catalog2);
  CHECK(catalog2.content_ids == catalog.content_ids);
  CHECK((catalog2.features - catalog.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m2.counts - m.counts).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m2.origin == m.origin);
  CHECK(m2.period_length == m.period_length);
}
