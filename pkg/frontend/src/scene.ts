/**
 * Scene management: one three.js mesh per model id, replaced wholesale when
 * a frame arrives (the host retransmits full meshes per change).
 *
 * Scene-graph state is independent of WebGL so tests can drive applyFrame
 * without a rendering context; attachRenderer wires the canvas, camera
 * controls, and render loop in the browser.
 */

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";

import type { DecodedFrame } from "./protocol.js";

export class ModelScene {
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly models = new Map<number, THREE.Mesh>();
  readonly revisions = new Map<number, number>();
  /** bumped on every applied frame; lets tests observe visible updates */
  updateCount = 0;

  private renderer: THREE.WebGLRenderer | null = null;
  private controls: OrbitControls | null = null;
  private framedOnce = false;

  constructor() {
    this.camera = new THREE.PerspectiveCamera(50, 1, 0.1, 5000);
    this.camera.up.set(0, 0, 1); // model space is z-up
    this.camera.position.set(60, -60, 45);
    this.scene.background = new THREE.Color(0x10141a);
    this.scene.add(new THREE.HemisphereLight(0xf0f4ff, 0x202428, 1.0));
    const key = new THREE.DirectionalLight(0xffffff, 1.6);
    key.position.set(80, -40, 120);
    this.scene.add(key);
    const grid = new THREE.GridHelper(200, 20, 0x2a3340, 0x1b222c);
    grid.rotation.x = Math.PI / 2; // grid lives in the xy ground plane
    this.scene.add(grid);
  }

  applyFrame(frame: DecodedFrame): void {
    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute("position", new THREE.BufferAttribute(frame.positions, 3));
    if (frame.normals) {
      geometry.setAttribute("normal", new THREE.BufferAttribute(frame.normals, 3));
    }
    geometry.setIndex(new THREE.BufferAttribute(frame.indices, 1));
    if (!frame.normals) {
      geometry.computeVertexNormals();
    }

    const existing = this.models.get(frame.modelId);
    if (existing) {
      existing.geometry.dispose();
      existing.geometry = geometry;
    } else {
      const material = new THREE.MeshPhongMaterial({
        color: 0x8fb6e8, specular: 0x222222, shininess: 28,
        side: THREE.DoubleSide,
      });
      const mesh = new THREE.Mesh(geometry, material);
      this.models.set(frame.modelId, mesh);
      this.scene.add(mesh);
    }
    this.revisions.set(frame.modelId, frame.revision);
    this.updateCount += 1;
    if (!this.framedOnce && frame.vertexCount > 0) {
      this.frameContents();
      this.framedOnce = true;
    }
  }

  /** Aim the camera at the bounding sphere of everything streamed so far. */
  frameContents(): void {
    const box = new THREE.Box3();
    for (const mesh of this.models.values()) {
      mesh.geometry.computeBoundingBox();
      if (mesh.geometry.boundingBox) box.union(mesh.geometry.boundingBox);
    }
    if (box.isEmpty()) return;
    const center = box.getCenter(new THREE.Vector3());
    const radius = Math.max(box.getSize(new THREE.Vector3()).length() / 2, 1);
    const dir = new THREE.Vector3(1, -1, 0.7).normalize();
    this.camera.position.copy(center.clone().addScaledVector(dir, radius * 2.6));
    this.camera.near = radius / 100;
    this.camera.far = radius * 100;
    this.camera.updateProjectionMatrix();
    this.camera.lookAt(center);
    if (this.controls) {
      this.controls.target.copy(center);
      this.controls.update();
    }
  }

  attachRenderer(canvas: HTMLCanvasElement): void {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.enableDamping = true;
    const resize = () => {
      const w = canvas.clientWidth || canvas.width;
      const h = canvas.clientHeight || canvas.height;
      this.renderer!.setSize(w, h, false);
      this.camera.aspect = w / h;
      this.camera.updateProjectionMatrix();
    };
    resize();
    window.addEventListener("resize", resize);
    this.renderer.setAnimationLoop(() => {
      this.controls?.update();
      this.renderer!.render(this.scene, this.camera);
    });
  }
}
