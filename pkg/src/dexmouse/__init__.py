"""Software twin of a tendon-driven force-feedback teleoperation interface.

Subsystems: shared units (:mod:`dexmouse.core`), actuator-bus codec and
simulated transport (:mod:`dexmouse.wire`), 100 Hz feedback firmware
(:mod:`dexmouse.firmware`), proportional retargeting (:mod:`dexmouse.retarget`),
virtual target hand (:mod:`dexmouse.simhand`), auxiliary stream alignment
(:mod:`dexmouse.streams`), episode recording (:mod:`dexmouse.episodes`),
and the live session orchestrator (:mod:`dexmouse.session`).
"""

__version__ = "0.1.0"
