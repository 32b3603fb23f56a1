#pragma once

// HTTP front end for TuneSession.

#include <filesystem>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "dicseg/tune_session.hpp"

namespace dicseg {

inline constexpr const char* kPlaceholderPage =
    "<!doctype html><title>dicseg tuning</title>"
    "<p>No UI bundle installed. The JSON API lives under <code>/api</code>.</p>\n";

namespace detail {

inline void send_error(httplib::Response& res, int status, const std::string& msg,
                       const std::vector<std::string>& fields = {}) {
    res.status = status;
    res.set_content(json{{"error", msg}, {"fields", fields}}.dump(), "application/json");
}

inline FrameOverride parse_triplet(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error&) {
        throw ValidationError("request body is not valid JSON", {});
    }
    if (!j.is_object()) throw ValidationError("request body must be a JSON object", {});
    FrameOverride t;
    std::vector<std::string> bad;
    auto field = [&](const char* key, double& out) {
        if (!j.contains(key) || !j.at(key).is_number()) {
            bad.push_back(key);
        } else {
            out = j.at(key).get<double>();
        }
    };
    field("d1", t.d1);
    field("d2", t.d2);
    field("threshold", t.threshold);
    if (!bad.empty()) throw ValidationError("missing or non-numeric fields", bad);
    return t;
}

inline int parse_index(const httplib::Request& req) {
    const auto& s = req.path_params.at("i");
    std::size_t used = 0;
    int idx = -1;
    try {
        idx = std::stoi(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty()) throw NotFoundError("no frame '" + s + "'");
    return idx;
}

template <typename Fn>
auto guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const ValidationError& e) {
            send_error(res, 422, e.what(), e.fields());
        } catch (const NotFoundError& e) {
            send_error(res, 404, e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, e.what());
        }
    };
}

}  // namespace detail

/// Registers the /api routes and static UI serving on `server`.
inline void install_routes(httplib::Server& server, TuneSession& session,
                           const std::optional<std::filesystem::path>& ui_dir = std::nullopt) {
    using detail::guarded;
    server.Get("/api/frames", guarded([&](const httplib::Request&, httplib::Response& res) {
                   json frames = json::array();
                   for (const auto& f : session.list_frames()) {
                       frames.push_back({{"frame_index", f.frame_index},
                                         {"timestamp", f.timestamp},
                                         {"has_override", f.has_override}});
                   }
                   res.set_content(frames.dump(), "application/json");
               }));
    server.Get("/api/frames/:i/original", guarded([&](const httplib::Request& req, httplib::Response& res) {
                   const auto bytes = session.original_png(detail::parse_index(req));
                   res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
               }));
    server.Post("/api/frames/:i/preview", guarded([&](const httplib::Request& req, httplib::Response& res) {
                    const int idx = detail::parse_index(req);
                    session.frame(idx);
                    const auto p = session.preview(idx, detail::parse_triplet(req.body));
                    const json body{{"filtered", base64_encode(p.filtered_png)},
                                    {"mask", base64_encode(p.mask_png)},
                                    {"overlay", base64_encode(p.overlay_png)},
                                    {"measurement", to_json(p.measurement)}};
                    res.set_content(body.dump(), "application/json");
                }));
    server.Post("/api/frames/:i/accept", guarded([&](const httplib::Request& req, httplib::Response& res) {
                    const int idx = detail::parse_index(req);
                    session.frame(idx);
                    session.accept(idx, detail::parse_triplet(req.body));
                    res.status = 204;
                }));
    server.Get("/api/overrides", guarded([&](const httplib::Request&, httplib::Response& res) {
                   res.set_content(session.export_overrides().dump(2), "application/json");
               }));
    if (ui_dir && server.set_mount_point("/", ui_dir->string())) return;
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(kPlaceholderPage, "text/html");
    });
}

}  // namespace dicseg
