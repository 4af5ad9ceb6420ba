#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "csi/core_types.hpp"
#include "csi/smm_em.hpp"

namespace csi {

inline constexpr const char* kTrajectorySchema = "csi.trajectories/1";
inline constexpr const char* kModelSchema = "csi.model/1";

// ---- trajectories as JSON lines ------------------------------------------------
// line 1: {"schema", "states", "num_transient", "max_holding", "diagnosis_labels"}
// then one object per patient: {"id", "visits": [[state, days], ...], "exit", "attributes"?}

void write_trajectories(std::ostream& out, const TrajectoryData& data);
TrajectoryData read_trajectories(std::istream& in);
void save_trajectories(const std::string& path, const TrajectoryData& data);
TrajectoryData load_trajectories(const std::string& path);

// ---- raw ADT ingestion -----------------------------------------------------------

/// Raw ward label -> state label. Disposition labels name absorbing states directly.
struct WardGrouping {
  std::map<std::string, std::string> wards;
  std::vector<std::string> absorbing;   // in state-id order
  std::vector<std::string> transient;   // optional explicit order; default sorted grouped labels
  bool merge_repeats = true;            // fuse consecutive stays in the same grouped state

  static WardGrouping from_json(const nlohmann::json& j);
  /// Identity map over the given labels.
  static WardGrouping identity(const std::vector<std::string>& wards, const std::vector<std::string>& absorbing);
};

struct IngestOptions {
  double hours_per_unit = 24.0;            // timestamps in hours when numeric
  std::optional<int> max_holding;          // default: largest observed holding time
  bool timestamps_in_units = false;        // numeric timestamps already in time units
};

struct RejectedRecord {
  std::size_t line = 0;
  std::string patient;
  std::string reason;
};

struct IngestReport {
  std::size_t records = 0;
  std::size_t patients = 0;
  std::size_t rejected_patients = 0;
  std::size_t dropped_short = 0;   // total stay of one time unit
  std::size_t merged_stays = 0;
  std::size_t retained = 0;
  double retention = 0.0;          // retained / patients
  std::vector<RejectedRecord> rejected;

  nlohmann::json to_json() const;
};

struct IngestResult {
  TrajectoryData data;
  IngestReport report;
};

/// CSV with a header naming at least patient_id, ward, entry, exit, disposition;
/// optional age, sex (M/F), diagnosis. Timestamps are numbers (hours, or time units)
/// or "YYYY-MM-DD[ HH:MM[:SS]]". Durations are rounded up to whole units, minimum 1.
IngestResult ingest_adt_csv(std::istream& in, const WardGrouping& grouping, const IngestOptions& options = {});
IngestResult ingest_adt_file(const std::string& path, const WardGrouping& grouping, const IngestOptions& options = {});

/// Writes each visit as one ADT row in time units (inverse of ingest with
/// timestamps_in_units).
void export_adt_csv(std::ostream& out, const TrajectoryData& data);

// ---- fitted models ---------------------------------------------------------------

struct ModelMetadata {
  std::optional<EmConfig> config;
  double objective = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> diagnosis_labels;
};

struct SavedModel {
  SmmParams params;
  ModelMetadata meta;
};

nlohmann::json params_to_json(const SmmParams& params);
SmmParams params_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const SavedModel& model);
SavedModel model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const SavedModel& model);
SavedModel load_model(const std::string& path);

}  // namespace csi
