#include "weakform/json_util.hpp"

namespace weakform {

nlohmann::json grid_to_json(const Grid& g) {
  nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array(), points = nlohmann::json::array(),
                 periodic = nlohmann::json::array();
  for (const Axis& a : g.axes()) {
    lo.push_back(a.lo);
    hi.push_back(a.hi);
    points.push_back(a.points);
    periodic.push_back(a.periodic);
  }
  return {{"lo", lo}, {"hi", hi}, {"points", points}, {"periodic", periodic}};
}

Grid grid_from_json(const nlohmann::json& j) {
  const auto& points = j.at("points");
  std::vector<Axis> axes;
  for (std::size_t a = 0; a < points.size(); ++a)
    axes.push_back(Axis{j.at("lo").at(a).get<double>(), j.at("hi").at(a).get<double>(), points[a].get<std::size_t>(),
                        j.at("periodic").at(a).get<bool>()});
  return Grid(std::move(axes));
}

}  // namespace weakform
