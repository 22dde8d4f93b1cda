#include "ranagent/orchestrator/plan.hpp"

#include <functional>
#include <map>
#include <set>

#include "ranagent/core/errors.hpp"
#include "ranagent/reasoning/types.hpp"

namespace ranagent::orchestrator {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::workflow: return "workflow";
    case Mode::agent: return "agent";
    case Mode::agentic: return "agentic";
  }
  return "workflow";
}

Mode mode_from_string(std::string_view text) {
  if (text == "workflow") return Mode::workflow;
  if (text == "agent") return Mode::agent;
  if (text == "agentic") return Mode::agentic;
  throw Error(Errc::invalid_argument, "unknown mode '" + std::string(text) + "'", "mode");
}

std::string_view to_string(GoalKind kind) {
  switch (kind) {
    case GoalKind::investigate_degradation: return "investigate_degradation";
    case GoalKind::minimize_latency: return "minimize_latency";
    case GoalKind::balance_load: return "balance_load";
    case GoalKind::reduce_energy: return "reduce_energy";
  }
  return "investigate_degradation";
}

GoalKind goal_kind_from_string(std::string_view text) {
  for (auto k : {GoalKind::investigate_degradation, GoalKind::minimize_latency, GoalKind::balance_load,
                 GoalKind::reduce_energy}) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::invalid_argument, "unknown goal kind '" + std::string(text) + "'", "intent.goal");
}

void validate_intent(const Intent& intent, const sim::NetworkTopology& topology) {
  if (intent.start < 0) throw Error(Errc::invalid_argument, "start must be >= 0", "intent.start");
  if (intent.end != 0 && intent.end <= intent.start) {
    throw Error(Errc::invalid_argument, "window is empty", "intent.end");
  }
  if (intent.scope && !topology.contains(*intent.scope)) {
    throw Error(Errc::invalid_argument, "unknown element " + to_string(*intent.scope), "intent.scope");
  }
}

Json to_json(const Intent& intent) {
  return Json{{"goal", std::string(to_string(intent.goal))},
              {"scope", intent.scope ? reasoning::element_json(*intent.scope) : Json(nullptr)},
              {"start", intent.start},
              {"end", intent.end}};
}

Intent intent_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_object()) throw Error(Errc::invalid_argument, "expected an object", path);
  Intent intent;
  if (doc.contains("goal")) {
    try {
      intent.goal = goal_kind_from_string(require_string(doc, "goal", path));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), join_path(path, "goal"));
    }
  }
  if (auto it = doc.find("scope"); it != doc.end() && !it->is_null()) {
    intent.scope = reasoning::element_from_json(*it, join_path(path, "scope"));
  }
  if (doc.contains("start")) intent.start = require_int(doc, "start", path);
  if (doc.contains("end")) intent.end = require_int(doc, "end", path);
  return intent;
}

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::query: return "query";
    case StepKind::analyze: return "analyze";
    case StepKind::reason: return "reason";
    case StepKind::reflect: return "reflect";
    case StepKind::retrieve_precedents: return "retrieve_precedents";
    case StepKind::consult_docs: return "consult_docs";
    case StepKind::propose: return "propose";
    case StepKind::validate: return "validate";
  }
  return "query";
}

const PlanStep* Plan::find(const std::string& id) const {
  for (const auto& s : steps) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

void validate_plan(const Plan& plan) {
  std::map<std::string, const PlanStep*> by_id;
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    if (!by_id.emplace(plan.steps[i].id, &plan.steps[i]).second) {
      throw Error(Errc::invalid_argument, "duplicate step id " + plan.steps[i].id, index_path("steps", i));
    }
  }
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    for (const auto& dep : plan.steps[i].depends_on) {
      if (!by_id.contains(dep)) {
        throw Error(Errc::invalid_argument, "unknown dependency " + dep, join_path(index_path("steps", i), "depends_on"));
      }
    }
  }
  // Depth-first search with colours.
  std::map<std::string, int> colour;
  std::function<void(const PlanStep&)> visit = [&](const PlanStep& s) {
    colour[s.id] = 1;
    for (const auto& dep : s.depends_on) {
      if (colour[dep] == 1) throw Error(Errc::invalid_argument, "dependency cycle through " + dep, "steps");
      if (colour[dep] == 0) visit(*by_id.at(dep));
    }
    colour[s.id] = 2;
  };
  for (const auto& s : plan.steps) {
    if (colour[s.id] == 0) visit(s);
  }
}

Plan decompose_intent(const Intent& intent, Mode mode, const std::string& context_digest) {
  if (intent.goal != GoalKind::investigate_degradation) {
    throw Error(Errc::unsupported_intent,
                "goal '" + std::string(to_string(intent.goal)) + "' is not implemented; implemented: investigate_degradation",
                "intent.goal");
  }
  const Json scope = intent.scope ? Json(to_string(*intent.scope)) : Json("network");
  Plan plan;
  auto add = [&](std::string id, StepKind kind, std::vector<std::string> deps, Json params = Json::object()) {
    params["scope"] = scope;
    params["context"] = context_digest;
    plan.steps.push_back({std::move(id), kind, std::move(params), std::move(deps)});
  };
  add("query", StepKind::query, {}, {{"source", "pm,fm,cm,im"}});
  add("analyze", StepKind::analyze, {"query"});
  add("reason", StepKind::reason, {"analyze"});
  switch (mode) {
    case Mode::workflow:
      add("reflect-context", StepKind::reflect, {"reason"}, {{"evidence", "inventory"}});
      add("follow-up", StepKind::query, {"reflect-context"}, {{"evidence", "refined queries"}});
      add("reflect", StepKind::reflect, {"follow-up"});
      break;
    case Mode::agent:
      add("follow-up", StepKind::query, {"reason"}, {{"evidence", "refined queries"}, {"repeat", true}});
      add("reflect", StepKind::reflect, {"follow-up"}, {{"repeat", true}});
      break;
    case Mode::agentic:
      add("precedents", StepKind::retrieve_precedents, {"reason"}, {{"agent", "historical"}});
      add("docs", StepKind::consult_docs, {"reason"}, {{"agent", "documentation"}});
      add("reflect", StepKind::reflect, {"precedents", "docs"}, {{"repeat", true}});
      add("propose", StepKind::propose, {"reflect"}, {{"agent", "master"}});
      add("validate", StepKind::validate, {"propose"}, {{"agent", "validation"}});
      break;
  }
  validate_plan(plan);
  return plan;
}

Json to_json(const PlanStep& step) {
  return Json{{"id", step.id},
              {"kind", std::string(to_string(step.kind))},
              {"parameters", step.parameters},
              {"depends_on", step.depends_on}};
}

Json to_json(const Plan& plan) {
  Json steps = Json::array();
  for (const auto& s : plan.steps) steps.push_back(to_json(s));
  return Json{{"steps", steps}};
}

}  // namespace ranagent::orchestrator
