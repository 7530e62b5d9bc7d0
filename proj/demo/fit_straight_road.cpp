// Fits a lane model to noise-free posts on a two-lane straight road and
// prints the lateral position of each marking at a few distances ahead.

#include <cstdio>

#include "delin/delin.hpp"

int main() {
    delin::RoadCourse course;
    course.segments = {delin::CoursePrimitive::straight(200.0)};
    const auto scene = delin::generate_scene(course, 0.0, 1);
    const auto detections = delin::simulate_detections(scene, {}, 90.0);

    const auto model = delin::fit_lanes(detections, course.layout, 10.0);
    std::printf("lanes: %d, detection range: %.1f m\n", model.lane_count, model.detection_range_m);
    for (std::size_t k = 0; k < model.markings.size(); ++k) {
        const auto& pts = model.markings[k].points();
        std::printf("marking %zu:", k);
        for (std::size_t i = 0; i < pts.size(); i += pts.size() / 4) {
            std::printf("  (%.1f, %.3f)", pts[i].x, pts[i].y);
        }
        std::printf("\n");
    }
}
