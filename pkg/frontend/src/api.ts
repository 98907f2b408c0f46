import type { SubmitAck, TaskView, UiConfig } from "./types.js";

export class ConflictError extends Error {}

const TRANSIENT_RETRIES = 2;
const RETRY_DELAY_MS = 150;

function sleep(ms: number): Promise<void> {
    return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Thin client for the annotation service; retries transient submit failures. */
export class ApiClient {
    constructor(
        private readonly base: string = "",
        private readonly fetchFn: typeof fetch = fetch,
    ) {}

    private url(path: string): string {
        return this.base + path;
    }

    async uiConfig(): Promise<UiConfig> {
        const resp = await this.fetchFn(this.url("/ui-config"));
        if (!resp.ok) throw new Error(`ui-config failed: ${resp.status}`);
        return (await resp.json()) as UiConfig;
    }

    async nextTask(annotatorId: string, campaignId: string): Promise<TaskView | null> {
        const path = `/annotators/${encodeURIComponent(annotatorId)}/next?campaign=${encodeURIComponent(campaignId)}`;
        const resp = await this.fetchFn(this.url(path));
        if (!resp.ok) throw new Error(`next task failed: ${resp.status}`);
        const body = (await resp.json()) as { task: TaskView | null };
        return body.task;
    }

    async submitScore(
        annotatorId: string,
        campaignId: string,
        taskId: string,
        score: number,
    ): Promise<SubmitAck> {
        const payload = JSON.stringify({
            annotator_id: annotatorId,
            campaign_id: campaignId,
            task_id: taskId,
            score,
        });
        let lastError: unknown = null;
        for (let attempt = 0; attempt <= TRANSIENT_RETRIES; attempt++) {
            let resp: Response;
            try {
                resp = await this.fetchFn(this.url("/scores"), {
                    method: "POST",
                    headers: { "content-type": "application/json" },
                    body: payload,
                });
            } catch (err) {
                lastError = err; // network hiccup: retry
                await sleep(RETRY_DELAY_MS * (attempt + 1));
                continue;
            }
            if (resp.status === 409) {
                throw new ConflictError(await resp.text());
            }
            if (resp.status >= 500) {
                lastError = new Error(`server error ${resp.status}`);
                await sleep(RETRY_DELAY_MS * (attempt + 1));
                continue;
            }
            if (!resp.ok) {
                throw new Error(`submit rejected: ${resp.status} ${await resp.text()}`);
            }
            return (await resp.json()) as SubmitAck;
        }
        throw lastError instanceof Error ? lastError : new Error(String(lastError));
    }

    imageUrl(ref: string): string {
        return this.url(`/images/${encodeURIComponent(ref)}`);
    }
}
