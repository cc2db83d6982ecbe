#include "opcast/mock_datastore.hpp"

#include <httplib.h>

#include <json.hpp>

#include "opcast/error.hpp"
#include "opcast/io.hpp"

namespace opcast {

namespace fs = std::filesystem;
using json = nlohmann::json;

FixtureStore::FixtureStore(fs::path root) : root_(std::move(root)) {
  const fs::path manifest = root_ / "manifest.json";
  if (!fs::exists(manifest)) throw Error(Errc::BadFixture, manifest.string(), "manifest.json not found");
  try {
    const auto doc = json::parse(read_file_text(manifest));
    for (const auto& [name, entry] : doc.at("datasets").items()) {
      Dataset ds;
      std::vector<Date> dates;
      for (const auto& d : entry.at("dates")) dates.push_back(parse_date(d.get<std::string>()));
      ds.dates = AvailabilityIndex(std::move(dates));
      for (const auto& d : entry.value("fail", json::array())) ds.fail.insert(parse_date(d.get<std::string>()));
      datasets_.emplace(name, std::move(ds));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::BadFixture, manifest.string(), e.what());
  } catch (const Error& e) {
    throw Error(Errc::BadFixture, manifest.string(), e.what());
  }
  for (const auto& [name, ds] : datasets_) {
    for (Date d : ds.dates.dates()) {
      if (!fs::exists(file_for(name, d))) throw Error(Errc::BadFixture, file_for(name, d).string(), "missing grid file");
    }
  }
}

AvailabilityIndex FixtureStore::availability(const std::string& name) const {
  auto it = datasets_.find(name);
  return it == datasets_.end() ? AvailabilityIndex{} : it->second.dates;
}

bool FixtureStore::is_failing(const std::string& name, Date date) const {
  auto it = datasets_.find(name);
  return it != datasets_.end() && it->second.fail.contains(date);
}

fs::path FixtureStore::file_for(const std::string& name, Date date) const {
  return root_ / name / (format_date(date) + ".opgrid");
}

std::optional<Grid> FixtureStore::load(const std::string& name, Date date) const {
  if (!availability(name).contains(date)) return std::nullopt;
  return read_opgrid_file(file_for(name, date).string());
}

MockDatastore::MockDatastore(fs::path fixture_dir, int port, std::string host)
    : fixtures_(std::move(fixture_dir)), host_(std::move(host)), server_(std::make_unique<httplib::Server>()) {
  server_->set_pre_routing_handler([this](const httplib::Request& req, httplib::Response&) {
    std::string entry = req.method + " " + req.path;
    char sep = '?';
    for (const auto& [k, v] : req.params) {
      entry += sep + k + "=" + v;
      sep = '&';
    }
    std::lock_guard lock(mutex_);
    log_.push_back(std::move(entry));
    return httplib::Server::HandlerResponse::Unhandled;
  });

  server_->Get(R"(/datasets/([^/]+)/availability)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    if (!fixtures_.has_dataset(name)) {
      res.status = 404;
      res.set_content(R"({"error": "unknown dataset"})", "application/json");
      return;
    }
    const AvailabilityIndex index = fixtures_.availability(name);
    json dates = json::array();
    for (Date d : index.dates()) dates.push_back(format_date(d));
    res.set_content(json{{"dates", dates}}.dump(), "application/json");
  });

  server_->Get(R"(/datasets/([^/]+)/data)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    auto fail = [&](int status, const std::string& why) {
      res.status = status;
      res.set_content(json{{"error", why}}.dump(), "application/json");
    };
    if (!fixtures_.has_dataset(name)) return fail(404, "unknown dataset");
    if (!req.has_param("date")) return fail(400, "missing date");
    Date date;
    try {
      date = parse_date(req.get_param_value("date"));
    } catch (const Error& e) {
      return fail(400, e.what());
    }
    if (failing(name, date)) return fail(503, "injected failure");
    try {
      auto grid = fixtures_.load(name, date);
      if (!grid) return fail(404, "date not available");
      if (req.has_param("bbox")) *grid = crop_bbox(*grid, BBox::parse(req.get_param_value("bbox")));
      const auto bytes = encode_opgrid(*grid);
      res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
    } catch (const Error& e) {
      const bool client_error = e.code() == Errc::BadBBox || e.code() == Errc::EmptyCrop;
      return fail(client_error ? 400 : 500, e.what());
    }
  });

  // SO_REUSEADDR only, no SO_REUSEPORT
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  if (port == 0) {
    port_ = server_->bind_to_any_port(host_);
    if (port_ <= 0) throw Error(Errc::PortInUse, host_, "could not bind any port");
  } else {
    if (!server_->bind_to_port(host_, port)) throw Error(Errc::PortInUse, std::to_string(port));
    port_ = port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockDatastore::~MockDatastore() { stop(); }

void MockDatastore::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void MockDatastore::wait() {
  if (thread_.joinable()) thread_.join();
}

std::string MockDatastore::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

void MockDatastore::inject_failure(const std::string& dataset, Date date) {
  std::lock_guard lock(mutex_);
  injected_.emplace(dataset, date);
}

void MockDatastore::clear_injected_failures() {
  std::lock_guard lock(mutex_);
  injected_.clear();
}

bool MockDatastore::failing(const std::string& dataset, Date date) const {
  if (fixtures_.is_failing(dataset, date)) return true;
  std::lock_guard lock(mutex_);
  return injected_.contains({dataset, date});
}

std::size_t MockDatastore::request_count() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::vector<std::string> MockDatastore::request_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

void MockDatastore::clear_log() {
  std::lock_guard lock(mutex_);
  log_.clear();
}

}  // namespace opcast
