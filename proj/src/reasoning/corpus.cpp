#include "ranagent/reasoning/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "ranagent/core/errors.hpp"

namespace ranagent::reasoning {

namespace {

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words{
      "a",    "about", "an",   "and",  "are",   "as",   "at",    "be",   "by",   "can",  "do",
      "does", "for",   "from", "has",  "have",  "how",  "i",     "if",   "in",   "into", "is",
      "it",   "its",   "of",   "on",   "or",    "so",   "that",  "the",  "their", "then", "there",
      "these", "this", "to",   "was",  "what",  "when", "where", "which", "while", "who", "why",
      "will", "with",  "would", "you", "your",  "not",  "no",    "than", "too",  "very", "we"};
  return words;
}

Corpus make_bundled() {
  return {
      {"alarm-ru-tx-fault",
       "RU_TX_FAULT alarm",
       {"RU_TX_FAULT is raised by the radio unit when the transmit chain fails its power self test. "
        "Every cell served by the radio unit degrades together, so a hardware_fault on the node is the "
        "likely cause when the alarm coincides with the KPI drop. Open a ticket for field service; "
        "configuration changes do not clear the fault."}},
      {"band-interference",
       "External interference on a band",
       {"Uplink interference from an external source raises the noise floor on every cell of one band. "
        "Throughput and setup success fall on all cells of the band at about the same time while other "
        "bands on the same sites stay clean. Treat it as band_level_interference and open a ticket for "
        "spectrum investigation rather than retuning individual cells."}},
      {"capacity-overload",
       "Capacity overload",
       {"Sustained PRB utilization above ninety percent together with falling throughput per user points "
        "to capacity_overload. It usually follows traffic growth or a neighbour outage. Load balancing "
        "through handover_offset_db or a capacity expansion are the usual remedies."}},
      {"cell-local-degradation",
       "Degradation limited to one cell",
       {"When one cell degrades while its siblings on the same node are unaffected the cause is local "
        "to that cell, for example antenna misalignment or a coverage change. A cell_local_degradation "
        "is first addressed by a small tx_power_dbm increase or an electrical_tilt_deg correction, "
        "verified against the guarded KPI before it is kept."}},
      {"config-regression",
       "Regression after a configuration change",
       {"A KPI shift that starts shortly after a CM change on the same cell is a config_regression "
        "until proven otherwise. Reverting the change restores the previous parameter value and is the "
        "lowest risk remedy. Check the CM history over the day around the onset before reverting."}},
      {"kpi-call-drop",
       "Call drop rate",
       {"call_drop_rate_pct is the share of established calls released abnormally. Lower is better. "
        "It rises with coverage holes, interference and handover failures."}},
      {"kpi-dl-throughput",
       "Downlink throughput",
       {"dl_throughput_mbps is the average downlink user throughput of a cell over the interval. It "
        "follows a daily traffic pattern and drops with interference, power reduction or overload."}},
      {"kpi-rrc-setup",
       "RRC setup success rate",
       {"rrc_setup_success_rate_pct is the share of RRC connection attempts that complete. Drops on a "
        "whole band suggest interference; drops on a whole node suggest a hardware fault."}},
      {"param-handover-offset",
       "Handover offset",
       {"handover_offset_db biases the handover decision towards or away from a neighbour. A positive "
        "handover offset delays handover out of the cell. Large offsets shift load between cells and "
        "change ho_success_rate_pct; valid range is minus six to six dB."}},
      {"param-tilt",
       "Electrical tilt",
       {"electrical_tilt_deg points the antenna beam down. More tilt shrinks the footprint and reduces "
        "overshoot interference; too much tilt leaves coverage gaps at the cell edge. Valid range is "
        "zero to twelve degrees."}},
      {"param-tx-power",
       "Transmit power",
       {"tx_power_dbm sets the reference signal power of the cell. Raising it extends coverage and "
        "can restore throughput after a local degradation; it also adds interference to neighbours. "
        "Valid range is thirty to forty nine dBm."}},
      {"rollback-guard",
       "Guarded rollback",
       {"Every applied action is monitored over an evaluation window. If the guarded KPI worsens by more "
        "than the guard percentage the configuration snapshot taken before the action is restored and "
        "the outcome is recorded as rolled back."}},
  };
}

std::map<std::string, int> term_counts(std::string_view text) {
  std::map<std::string, int> counts;
  for (auto& t : content_terms(text)) ++counts[t];
  return counts;
}

}  // namespace

const Corpus& bundled_corpus() {
  static const Corpus corpus = make_bundled();
  return corpus;
}

Corpus corpus_from_json(const Json& doc) {
  if (!doc.is_array()) throw Error(Errc::invalid_argument, "expected an array of documents", "corpus");
  Corpus corpus;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string path = index_path("corpus", i);
    Document d;
    d.id = require_string(doc[i], "id", path);
    d.title = doc[i].value("title", std::string());
    const Json& passages = require(doc[i], "passages", path);
    if (!passages.is_array()) throw Error(Errc::invalid_argument, "expected an array", join_path(path, "passages"));
    for (const auto& p : passages) {
      if (!p.is_string()) throw Error(Errc::invalid_argument, "expected a string", join_path(path, "passages"));
      d.passages.push_back(p.get<std::string>());
    }
    corpus.push_back(std::move(d));
  }
  return corpus;
}

std::vector<std::string> content_terms(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !stopwords().contains(current)) terms.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      // Underscores split identifiers so "handover_offset_db" matches "handover offset".
      flush();
    }
  }
  flush();
  return terms;
}

RetrievalResult retrieve_doc_passages(std::string_view query, const Corpus& corpus, std::size_t k) {
  bool any_passage = false;
  for (const auto& d : corpus) any_passage = any_passage || !d.passages.empty();
  if (!any_passage) throw Error(Errc::empty_corpus, "documentation corpus is empty", "corpus");

  RetrievalResult result;
  const auto terms = content_terms(query);
  if (terms.empty()) {
    result.stopword_only = true;
    return result;
  }
  if (k == 0) return result;
  const std::set<std::string> unique_terms(terms.begin(), terms.end());

  struct Scored {
    const Document* doc;
    std::size_t passage;
    double score;
  };
  std::vector<Scored> scored;
  for (const auto& d : corpus) {
    for (std::size_t p = 0; p < d.passages.size(); ++p) {
      const auto counts = term_counts(d.title + " " + d.passages[p]);
      double score = 0.0;
      for (const auto& t : unique_terms) {
        if (auto it = counts.find(t); it != counts.end()) score += it->second;
      }
      if (score > 0.0) scored.push_back({&d, p, score});
    }
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.doc->id != b.doc->id) return a.doc->id < b.doc->id;
    return a.passage < b.passage;
  });
  if (scored.size() > k) scored.resize(k);
  for (const auto& s : scored) result.excerpts.push_back({s.doc->id, s.doc->passages[s.passage], s.score});
  return result;
}

}  // namespace ranagent::reasoning
