//! Planar forward kinematics of the hand.

use super::{HandGeometry, HandState};
use crate::math::{Vec2, Vec3};

/// World-frame link frames and fingertip points; all at palm working height.
#[derive(Clone, Debug)]
pub struct HandPoints {
    /// 21 points: index 0 is the palm center; per finger f the frames are
    /// mount, post-joint-1, post-joint-2, post-joint-3, tip at
    /// indices 1 + 5f .. 1 + 5f + 4.
    pub links: [Vec3; HandGeometry::LINK_COUNT],
    pub fingertips: [Vec3; HandGeometry::FINGERTIP_COUNT],
}

impl HandPoints {
    /// Consecutive in-finger segments (16 total), tagged with (finger, joint).
    pub fn link_segments(&self) -> impl Iterator<Item = (usize, usize, Vec2, Vec2)> + '_ {
        (0..HandGeometry::FINGERS).flat_map(move |f| {
            (0..HandGeometry::JOINTS_PER_FINGER).map(move |j| {
                let a = self.links[1 + 5 * f + j];
                let b = self.links[1 + 5 * f + j + 1];
                (f, j, a.xy(), b.xy())
            })
        })
    }
}

/// Chain the palm pose through each finger's mount ray and joint angles.
///
/// Joint angles accumulate: the k-th link of finger f points along
/// `palm_yaw + mount_angle[f] + sum(joints[f][0..=k])`.
pub fn fk_hand(hand: &HandState, geom: &HandGeometry) -> HandPoints {
    let palm = hand.palm_xy();
    let z = hand.palm_z();
    let yaw = hand.yaw();

    let mut links = [Vec3::ZERO; HandGeometry::LINK_COUNT];
    let mut fingertips = [Vec3::ZERO; HandGeometry::FINGERTIP_COUNT];
    links[0] = Vec3::new(palm.x, palm.y, z);

    for f in 0..HandGeometry::FINGERS {
        let mount_dir = yaw + geom.mount_angles[f];
        let mut p = palm.add(Vec2::from_angle(mount_dir).scale(geom.palm_radius));
        links[1 + 5 * f] = Vec3::new(p.x, p.y, z);

        let mut heading = mount_dir;
        let sign = HandGeometry::JOINT_SIGNS[f];
        for j in 0..HandGeometry::JOINTS_PER_FINGER {
            heading += sign * hand.joints[f * HandGeometry::JOINTS_PER_FINGER + j];
            p = p.add(Vec2::from_angle(heading).scale(geom.link_lengths[j]));
            links[1 + 5 * f + j + 1] = Vec3::new(p.x, p.y, z);
        }
        fingertips[f] = Vec3::new(p.x, p.y, z);
    }

    HandPoints { links, fingertips }
}
