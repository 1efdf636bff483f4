#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "privflow/code_search.hpp"
#include "privflow/model.hpp"

namespace privflow {

class Reasoner;

/// Endpoints and consume call sites, in location order.
std::vector<const Element*> q_source(const Service& service);

/// Entry-service endpoints a reasoner confirms as reachable through the
/// gateway. Throws NoEntryService.
std::vector<const Element*> q_user(const Program& program, Reasoner& reasoner);

struct UnresolvedChannel {
  std::string service;
  ElementId element;
  std::string reason;
};

struct ChannelScan {
  std::vector<Channel> channels;
  std::vector<UnresolvedChannel> unresolved;
};

/// Derives channels from MiniSrv-shaped call and endpoint sources. Outbound
/// identifiers are resolved by walking dataflow backwards to string constants.
ChannelScan q_inter(const Service& service);

/// Derived plus supplied channels of every service, keyed by service name.
struct ProgramChannels {
  std::map<std::string, std::vector<Channel>> by_service;
  std::vector<UnresolvedChannel> unresolved;
};

/// Throws Error when a supplied channel duplicates a derived one.
ProgramChannels collect_channels(const Program& program);

enum class MatchRule { exact, wildcard };

std::string_view to_string(MatchRule rule);

struct ChannelEdge {
  std::string from_service;
  Channel from;
  std::string to_service;
  Channel to;
  MatchRule rule = MatchRule::exact;

  bool operator==(const ChannelEdge&) const = default;
};

/// URL path with scheme, host, port, query string and fragment removed.
std::string normalize_http_identifier(std::string_view identifier);

/// nullopt when the two identifiers do not match.
std::optional<MatchRule> match_identifier(ChannelProtocol protocol, std::string_view out_identifier,
                                          std::string_view in_identifier);

struct ChannelMatches {
  std::vector<ChannelEdge> edges;
  std::vector<std::string> diagnostics;  // ambiguous matches
};

ChannelMatches match_channels(const ProgramChannels& channels);

// ---------------------------------------------------------------------------

struct GlobalNode {
  std::string service;
  ElementId element;
};

struct GlobalEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  std::variant<FlowPath, ChannelEdge> witness;
};

struct GlobalGraph {
  std::vector<GlobalNode> nodes;
  std::vector<GlobalEdge> edges;
  /// Outgoing edge indices per node, sorted by target element id.
  std::vector<std::vector<std::size_t>> out;
  std::map<ElementId, std::size_t> index;

  std::optional<std::size_t> find(std::string_view id) const;
};

struct GraphInputs {
  std::vector<ElementId> privops;
  std::vector<ElementId> user_sources;
  ProgramChannels channels;
  std::vector<ChannelEdge> channel_edges;
};

/// Called once per phase-one q_flow query, in service order.
using FlowObserver =
    std::function<void(const std::string& service, const ElementId& from, const ElementId& to, bool connected)>;

GlobalGraph build_global_graph(const Program& program, const GraphInputs& inputs, const FlowObserver& observer = {},
                               bool parallel = true);

struct GlobalPath {
  std::vector<ElementId> nodes;
  std::vector<std::size_t> edges;  // edges[i] joins nodes[i] and nodes[i + 1]
  std::string id;                  // hex FNV-1a of the node ids joined by '>'
};

std::string path_id(const std::vector<ElementId>& nodes);

struct GlobalFlows {
  std::vector<GlobalPath> paths;
  bool truncated = false;
};

/// Every simple path from a source to a sink, in lexicographic order of node
/// id sequences, capped at `cap`.
GlobalFlows q_globalflow(const GlobalGraph& graph, const std::vector<ElementId>& sources,
                         const std::vector<ElementId>& sinks, std::size_t cap = 10000);

std::string to_dot(const GlobalGraph& graph, const Program& program);

}  // namespace privflow
