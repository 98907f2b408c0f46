import { ApiClient, ConflictError } from "./api.js";
import type { Session, TaskView, UiConfig } from "./types.js";

const DEFAULT_LABELS: Record<string, string> = {
    "1": "1 — no alignment",
    "2": "2 — weak alignment",
    "3": "3 — partial alignment",
    "4": "4 — good alignment",
    "5": "5 — perfect alignment",
};

/**
 * Single-session scoring flow: fetch a task, show its image (or pair),
 * record one 1-5 score per task, advance until the queue is empty.
 */
export class AnnotationApp {
    private task: TaskView | null = null;
    private config: UiConfig | null = null;
    private inFlight = false;
    private scoredTasks = new Set<string>();
    private done = false;
    /** last user-triggered async action, awaitable by tests */
    lastAction: Promise<void> = Promise.resolve();

    constructor(
        private readonly root: HTMLElement,
        private readonly api: ApiClient,
        private readonly session: Session,
    ) {}

    async start(): Promise<void> {
        try {
            this.config = await this.api.uiConfig();
        } catch {
            this.config = { api_base: "", show_prompt: false, score_labels: DEFAULT_LABELS };
        }
        document.addEventListener("keydown", (event) => {
            if (event.key >= "1" && event.key <= "5") {
                this.lastAction = this.score(Number(event.key));
            }
        });
        await this.loadNext();
    }

    private labels(): Record<string, string> {
        return this.config?.score_labels ?? DEFAULT_LABELS;
    }

    private async loadNext(): Promise<void> {
        let task: TaskView | null;
        try {
            task = await this.api.nextTask(this.session.annotatorId, this.session.campaignId);
        } catch (err) {
            this.renderError(`Could not fetch the next task: ${String(err)}`, false);
            return;
        }
        this.task = task;
        if (task === null) {
            this.done = true;
            this.renderComplete();
        } else {
            this.renderTask(task);
        }
    }

    /** Submit a score for the current task; no-ops while a submit is in flight. */
    async score(value: number): Promise<void> {
        const task = this.task;
        if (!task || this.done || this.inFlight) return;
        if (value < 1 || value > 5) return;
        if (this.scoredTasks.has(task.task_id)) return;

        this.inFlight = true;
        this.setButtonsEnabled(false);
        try {
            await this.api.submitScore(
                this.session.annotatorId,
                this.session.campaignId,
                task.task_id,
                value,
            );
            this.scoredTasks.add(task.task_id);
            await this.loadNext();
        } catch (err) {
            if (err instanceof ConflictError) {
                this.renderError(
                    "This task already has a different score from you. " +
                        "Refresh the page to resync your queue.",
                    true,
                );
            } else {
                // rollback: same task stays on screen, buttons re-enabled
                this.renderTask(task);
                this.showBanner(`Submit failed, please try again: ${String(err)}`);
            }
        } finally {
            this.inFlight = false;
        }
    }

    private setButtonsEnabled(enabled: boolean): void {
        this.root
            .querySelectorAll<HTMLButtonElement>("button.score")
            .forEach((b) => (b.disabled = !enabled));
    }

    private showBanner(message: string): void {
        let banner = this.root.querySelector<HTMLElement>(".banner");
        if (!banner) {
            banner = document.createElement("div");
            banner.className = "banner";
            this.root.prepend(banner);
        }
        banner.textContent = message;
    }

    private renderTask(task: TaskView): void {
        this.root.innerHTML = "";

        const counter = document.createElement("div");
        counter.className = "counter";
        counter.textContent = `${task.position} of ${task.total}`;
        this.root.append(counter);

        const stage = document.createElement("div");
        stage.className = task.image_refs.length === 2 ? "stage pair" : "stage single";
        for (const ref of task.image_refs) {
            const img = document.createElement("img");
            img.src = this.api.imageUrl(ref);
            img.alt = ref;
            stage.append(img);
        }
        this.root.append(stage);

        if (task.transition_label) {
            const label = document.createElement("div");
            label.className = "transition";
            label.textContent = task.transition_label;
            this.root.append(label);
        }

        const target = document.createElement("div");
        target.className = "target";
        target.textContent = task.prompt ?? task.attribute ?? "(no attribute)";
        this.root.append(target);

        const buttons = document.createElement("div");
        buttons.className = "scores";
        for (let value = 1; value <= 5; value++) {
            const button = document.createElement("button");
            button.className = "score";
            button.dataset.score = String(value);
            button.textContent = this.labels()[String(value)] ?? String(value);
            button.addEventListener("click", () => {
                this.lastAction = this.score(value);
            });
            buttons.append(button);
        }
        this.root.append(buttons);

        const hint = document.createElement("div");
        hint.className = "hint";
        hint.textContent = "Keys 1–5 also submit a score.";
        this.root.append(hint);
    }

    private renderComplete(): void {
        this.root.innerHTML = "";
        const doneBox = document.createElement("div");
        doneBox.className = "complete";
        doneBox.textContent = "All tasks complete — thank you!";
        this.root.append(doneBox);
    }

    private renderError(message: string, suggestRefresh: boolean): void {
        this.root.innerHTML = "";
        const box = document.createElement("div");
        box.className = "error";
        box.textContent = message;
        this.root.append(box);
        if (suggestRefresh) {
            const refresh = document.createElement("button");
            refresh.className = "refresh";
            refresh.textContent = "Refresh queue";
            refresh.addEventListener("click", () => {
                this.lastAction = this.loadNext();
            });
            this.root.append(refresh);
        }
    }
}
