#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ranagent/reasoning/types.hpp"

namespace ranagent::reasoning {

struct Document {
  std::string id;
  std::string title;
  std::vector<std::string> passages;
};

using Corpus = std::vector<Document>;

// Small bundled set of parameter descriptions, KPI definitions and
// troubleshooting notes used by the documentation agent.
const Corpus& bundled_corpus();

// Loads documents from a JSON array of {id, title, passages}.
Corpus corpus_from_json(const Json& doc);

struct RetrievalResult {
  std::vector<DocExcerpt> excerpts;
  // Set when the query had no content terms left after stopword removal.
  bool stopword_only = false;
};

// Lowercased alphanumeric terms with stopwords removed.
std::vector<std::string> content_terms(std::string_view text);

// Top-k passages by summed term frequency of the query's content terms.
// Ties are broken by doc id, then passage order. Passages scoring zero are
// never returned. Throws Error(empty_corpus).
RetrievalResult retrieve_doc_passages(std::string_view query, const Corpus& corpus, std::size_t k);

}  // namespace ranagent::reasoning
