// Virtual joystick: pointer position maps to a body-frame twist.
// Vertical deflection commands forward speed (up to the robot's 0.8 m/s
// cap, clamped again server-side), horizontal deflection commands turn rate.

export interface Twist {
  vx: number;
  vy: number;
  omega: number;
}

export class Joystick {
  engaged = false;
  twist: Twist = { vx: 0, vy: 0, omega: 0 };

  constructor(
    private el: HTMLElement,
    private knob: HTMLElement,
    private maxSpeed = 0.8,
    private maxOmega = 1.0,
  ) {
    el.addEventListener("pointerdown", (e) => {
      this.engaged = true;
      el.setPointerCapture(e.pointerId);
      this.update(e);
    });
    el.addEventListener("pointermove", (e) => {
      if (this.engaged) this.update(e);
    });
    const release = () => {
      this.engaged = false;
      this.twist = { vx: 0, vy: 0, omega: 0 };
      this.knob.style.transform = "translate(-50%, -50%)";
    };
    el.addEventListener("pointerup", release);
    el.addEventListener("pointercancel", release);
  }

  private update(e: PointerEvent): void {
    const rect = this.el.getBoundingClientRect();
    const half = rect.width / 2;
    let nx = (e.clientX - rect.left - half) / half;
    let ny = (e.clientY - rect.top - half) / half;
    const mag = Math.hypot(nx, ny);
    if (mag > 1) {
      nx /= mag;
      ny /= mag;
    }
    this.twist = joystickTwist(nx, ny, this.maxSpeed, this.maxOmega);
    this.knob.style.transform = `translate(calc(-50% + ${nx * half * 0.7}px), calc(-50% + ${ny * half * 0.7}px))`;
  }
}

export function joystickTwist(nx: number, ny: number, maxSpeed = 0.8, maxOmega = 1.0): Twist {
  // up is forward; pushing right turns clockwise (negative omega)
  return { vx: -ny * maxSpeed, vy: 0, omega: -nx * maxOmega };
}
