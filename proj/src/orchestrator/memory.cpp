#include "ranagent/orchestrator/memory.hpp"

#include <algorithm>

namespace ranagent::orchestrator {

std::string_view to_string(MemoryKind kind) {
  switch (kind) {
    case MemoryKind::pass: return "pass";
    case MemoryKind::query: return "query";
    case MemoryKind::hypotheses: return "hypotheses";
    case MemoryKind::note: return "note";
  }
  return "note";
}

const MemoryEntry& EpisodicMemory::append(int iteration, MemoryKind kind, Timestamp at, Json payload) {
  entries_.push_back({entries_.size() + 1, iteration, kind, at, std::move(payload)});
  return entries_.back();
}

std::vector<std::string> EpisodicMemory::issued_query_keys() const {
  std::vector<std::string> keys;
  for (const auto& e : entries_) {
    if (e.kind == MemoryKind::query) keys.push_back(e.payload.value("key", std::string()));
  }
  return keys;
}

std::vector<double> EpisodicMemory::confidence_history(const std::string& hypothesis_id) const {
  std::vector<double> out;
  for (const auto& e : entries_) {
    if (e.kind != MemoryKind::hypotheses || !e.payload.is_array()) continue;
    for (const auto& h : e.payload) {
      if (h.value("id", std::string()) == hypothesis_id) out.push_back(h.value("confidence", 0.0));
    }
  }
  return out;
}

bool CrossRunMemory::add(const store::OptimizationRecord& record) {
  if (record.outcome == store::Outcome::pending) return false;
  std::lock_guard lock(mu_);
  auto it = std::find_if(records_.begin(), records_.end(),
                         [&](const store::OptimizationRecord& r) { return r.record_id == record.record_id; });
  if (it != records_.end()) {
    *it = record;
  } else {
    records_.push_back(record);
  }
  return true;
}

std::vector<store::OptimizationRecord> CrossRunMemory::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::size_t CrossRunMemory::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

}  // namespace ranagent::orchestrator
