#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "privflow/model.hpp"

namespace privflow {

inline constexpr std::size_t npos_index = static_cast<std::size_t>(-1);

enum class NameMode { exact, regex };
enum class CgDirection { callers, callees };

std::string_view to_string(NameMode mode);
std::string_view to_string(CgDirection dir);

/// A variable-level path. hops[i] is the edge kind that justifies
/// nodes[i] -> nodes[i + 1].
struct FlowPath {
  std::vector<ElementId> nodes;
  std::vector<FlowEdgeKind> hops;

  bool operator==(const FlowPath&) const = default;
};

/// Elements with a matching name, in location order. Anonymous elements never
/// match. Regex mode uses ECMAScript syntax and requires a full match.
std::vector<const Element*> q_name(const Service& service, std::string_view pattern, NameMode mode);

std::vector<const Element*> q_ast(const Service& service, ElementKind kind);

/// Memoized; safe to call concurrently.
const FlowGraph& build_flow_graph(const Service& service);

/// Element indices a selector denotes: an exact id, else every element with
/// that exact name. Throws UnknownElement.
std::vector<std::size_t> resolve_selector(const Service& service, std::string_view selector);

/// Shortest path for every (source, sink) pair that is connected; src == dst
/// yields the singleton path.
std::vector<FlowPath> q_flow(const Service& service, std::string_view from, std::string_view to);
std::vector<FlowPath> q_flow(const Service& service, std::size_t from, std::size_t to);

/// Function-level call graph traversal. F calls G when a call site inside F,
/// or a decorator on F, has a calls edge to G.
std::vector<const Element*> q_cg(const Service& service, std::string_view function, CgDirection direction,
                                 int depth = 1);

/// Index of the function whose body contains the element, or npos_index.
std::size_t enclosing_function(const Service& service, std::size_t index);

Location get_location(const Service& service, std::string_view id);
std::string get_source(const Service& service, std::string_view id);
std::string get_type(const Service& service, std::string_view id);

}  // namespace privflow
