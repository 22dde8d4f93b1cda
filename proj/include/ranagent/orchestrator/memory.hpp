#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "ranagent/core/json_io.hpp"
#include "ranagent/reasoning/types.hpp"
#include "ranagent/store/store.hpp"

namespace ranagent::orchestrator {

enum class MemoryKind { pass, query, hypotheses, note };
std::string_view to_string(MemoryKind kind);

struct MemoryEntry {
  std::size_t seq = 0;  // 1-based, gapless
  int iteration = 0;
  MemoryKind kind = MemoryKind::note;
  Timestamp at = 0;  // simulated time
  Json payload;
};

// Per-run episodic log; append-only.
class EpisodicMemory {
public:
  const MemoryEntry& append(int iteration, MemoryKind kind, Timestamp at, Json payload);
  const std::vector<MemoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Keys of every query recorded so far.
  std::vector<std::string> issued_query_keys() const;

  // Confidence history of one hypothesis across recorded hypothesis sets.
  std::vector<double> confidence_history(const std::string& hypothesis_id) const;

private:
  std::vector<MemoryEntry> entries_;
};

// Optimization outcomes shared across runs. Only confirmed and rolled-back
// records are admitted. Thread-safe.
class CrossRunMemory {
public:
  // Returns false (and stores nothing) for pending records.
  bool add(const store::OptimizationRecord& record);
  std::vector<store::OptimizationRecord> records() const;
  std::size_t size() const;

private:
  mutable std::mutex mu_;
  std::vector<store::OptimizationRecord> records_;
};

}  // namespace ranagent::orchestrator
