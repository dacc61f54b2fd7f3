#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fedpop {

// One rating line from a MovieLens-format `u.data` file. The rating is
// treated downstream as the number of requests the event contributes.
struct RawEvent {
  int user_id = 0;
  int item_id = 0;
  int rating = 0;
  std::int64_t timestamp = 0;
};

// Per-content feature vectors. Feature vectors all share dimension Q;
// content sizes are unit (capacity is counted in items).
struct ContentCatalog {
  std::vector<int> content_ids;
  Eigen::MatrixXd features;      // F x Q, row f = features of content f
  std::vector<double> sizes;     // all 1.0

  // Provenance of the feature mapping, echoed into the catalog CSV so a
  // run can be reproduced from its artifacts alone.
  std::vector<int> genre_columns;  // indices into the 19 genre flags
  int year_min = 0;
  int year_max = 0;

  int num_contents() const { return static_cast<int>(content_ids.size()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  // Row index for a content id, or -1 when absent.
  int index_of(int content_id) const;
};

// Request counts r[f][n] for F contents over N periods. Counts are the
// per-period sums of event ratings.
struct RequestMatrix {
  Eigen::MatrixXd counts;        // F x N
  double period_length = 0.0;    // seconds
  std::int64_t origin = 0;       // timestamp of period 0's start
  std::int64_t dropped_outside = 0;  // events past period N-1
  std::int64_t dropped_unknown = 0;  // events for contents not in the catalog

  int num_contents() const { return static_cast<int>(counts.rows()); }
  int num_periods() const { return static_cast<int>(counts.cols()); }
};

enum class PartitionStrategy { kByUserHash, kRoundRobin };

// Assignment of events to fog nodes 1..M. Node matrices built from a
// partition sum element-wise to the global matrix.
struct Partition {
  int num_nodes = 0;
  std::vector<int> node_of_event;  // same order as the event list, values 1..M
};

// --- parsing ---------------------------------------------------------

// Tab-separated `user \t item \t rating \t timestamp` lines. Malformed
// lines raise io_error carrying the 1-based line number.
std::vector<RawEvent> parse_events(std::istream& in);
std::vector<RawEvent> parse_events_file(const std::string& path);

// Pipe-separated `u.item` rows (latin-1). Produces Q-dimensional feature
// vectors: the Q-2 most frequent genre flags in the corpus, min-max
// normalized release year, and a constant 1.0 bias component.
ContentCatalog parse_items(std::istream& in, int target_dim);
ContentCatalog parse_items_file(const std::string& path, int target_dim);

// --- shaping ---------------------------------------------------------

// Bins event ratings into N fixed periods starting at `origin` (pass -1
// to use the earliest event timestamp). Events outside the window or for
// unknown contents are dropped and counted.
RequestMatrix bin_requests(const std::vector<RawEvent>& events,
                           const ContentCatalog& catalog,
                           double period_length_seconds, int num_periods,
                           std::int64_t origin = -1);

Partition make_partition(const std::vector<RawEvent>& events, int num_nodes,
                         PartitionStrategy strategy, std::uint64_t seed);

// Per-node request matrices; all nodes share the global binning window so
// the matrices sum to the global one element-wise.
std::vector<RequestMatrix> partition_matrices(
    const std::vector<RawEvent>& events, const ContentCatalog& catalog,
    const Partition& partition, double period_length_seconds, int num_periods,
    std::int64_t origin);

// --- CSV artifacts ---------------------------------------------------

void write_catalog_csv(std::ostream& out, const ContentCatalog& catalog,
                       const std::string& provenance_comment);
void write_matrix_csv(std::ostream& out, const ContentCatalog& catalog,
                      const RequestMatrix& matrix,
                      const std::string& provenance_comment);

ContentCatalog read_catalog_csv(std::istream& in);
RequestMatrix read_matrix_csv(std::istream& in, const ContentCatalog& catalog);

}  // namespace fedpop
